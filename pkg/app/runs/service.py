"""Run orchestration: every CLI command as a reproducible, manifest-backed run."""

import hashlib
import json
import logging
from collections.abc import Callable
from pathlib import Path

import numpy as np

from app.config import RunConfig, settings
from app.data.panel import MinMaxScaler, SeriesPanel, load_panel, panel_to_jsonlines
from app.data.scenarios import (
    ScenarioDataset,
    make_augmentation_scenario,
    make_cold_start_scenario,
    make_far_forecast_scenario,
    make_stretch_scenario,
    scenario_from_json,
    scenario_to_json,
)
from app.data.synthetic import make_sinusoid_panel
from app.data.windows import admissible_starts, history, rolling_starts, value_windows
from app.errors import ConfigError, MissingDependencyError, MissingEncoderError
from app.evaluation.harness import BASELINES, EvalModel, per_window_csv, run_scenario_eval
from app.evaluation.impute import gan_impute, moving_average_impute
from app.evaluation.schemas import EvalSummary
from app.fid.encoder import CausalEncoder, EncoderConfig, load_encoder, save_encoder, train_encoder
from app.fid.samples import SampleSet, decode_samples, encode_samples
from app.fid.score import FidReport, context_fid, context_fid_at
from app.gan.model import GanConfig
from app.gan.sampling import GanSampler
from app.gan.trainer import TrainConfig, default_epochs, train
from app.logging import run_context
from app.runs.schemas import RunManifest, RunStatus
from app.storage import Storage
from app.tensor import make_rng

__all__ = [
    "COMMANDS",
    "RunService",
    "encoder_config_from",
    "gan_config_from",
    "git_blob_hash",
    "replay",
    "train_config_from",
]

logger = logging.getLogger(__name__)

COMMANDS = ("train", "sample", "score", "impute", "scenario", "eval")


def git_blob_hash(data: bytes) -> str:
    """SHA-1 of `data` framed as a git blob object."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def train_config_from(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs or default_epochs(cfg.target_length),
        batches_per_epoch=cfg.batches_per_epoch,
        batch_size=cfg.batch_size,
        stage_epochs=cfg.stage_epochs,
        fade_epochs=cfg.fade_epochs,
        lr=cfg.lr,
        betas=(cfg.beta1, cfg.beta2),
        moment_loss_weight=cfg.moment_loss_weight,
        self_attention=cfg.self_attention,
        fade_in=cfg.fade_in,
        moment_loss=cfg.moment_loss,
        context_length=cfg.context_length,
        seed=cfg.seed,
    )


def gan_config_from(cfg: RunConfig, n_series: int) -> GanConfig:
    return GanConfig(
        target_length=cfg.target_length,
        n_series=n_series,
        channels=cfg.channels,
        self_attention=cfg.self_attention,
        context_length=cfg.context_length,
        seed=cfg.seed,
    )


def encoder_config_from(cfg: RunConfig) -> EncoderConfig:
    return EncoderConfig(
        depth=cfg.encoder_depth,
        channels=cfg.encoder_channels,
        dim=cfg.encoder_dim,
        kernel=cfg.encoder_kernel,
        negatives=cfg.encoder_negatives,
        steps=cfg.encoder_steps,
        batch=cfg.encoder_batch,
        lr=cfg.encoder_lr,
        seed=cfg.seed,
    )


def _dumps(document) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


class RunService:
    """
    Runs one command under a RunConfig.

    Each run writes `<run_dir>/<command>.manifest.json` holding the config
    echo, the seed and a content hash of every input, so `replay` can rerun it.
    """

    def __init__(self, storage: Storage, config: RunConfig):
        self.storage = storage
        self.config = config

    def run(self, command: str):
        handlers: dict[str, Callable] = {
            "train": self.train,
            "sample": self.sample,
            "score": self.score,
            "impute": self.impute,
            "scenario": self.scenario,
            "eval": self.evaluate,
        }
        if command not in handlers:
            msg = f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}"
            raise ConfigError(msg)
        return handlers[command]()

    # Inputs

    def _read_input(self, key: str | None, what: str) -> bytes:
        if key is None:
            msg = f"{what} is required (set {what}=<key>)"
            raise ConfigError(msg)
        data = self.storage.read_bytes(key)
        if data is None:
            msg = f"{what} {key} does not exist; run the command that produces it first"
            raise MissingDependencyError(msg)
        return data

    def _dataset_bytes(self) -> bytes:
        if self.config.dataset_path is None:
            return b""
        try:
            return Path(self.config.dataset_path).read_bytes()
        except OSError as e:
            msg = f"cannot read dataset {self.config.dataset_path}: {e}"
            raise ConfigError(msg) from e

    def load_dataset(self) -> SeriesPanel:
        cfg = self.config
        if cfg.dataset_path is not None:
            return load_panel(cfg.dataset_path, cfg.dataset_format, cfg.split_timestamp, cfg.test_length)
        logger.info(f"No dataset_path; using {cfg.synthetic_series} synthetic sinusoid series")
        return make_sinusoid_panel(
            n_series=cfg.synthetic_series,
            length=cfg.synthetic_length,
            noise=cfg.synthetic_noise,
            seed=cfg.seed,
            test_length=cfg.test_length,
        )

    def load_scenario(self) -> ScenarioDataset:
        data = self._read_input(self.config.scenario, "scenario")
        return scenario_from_json(data.decode("utf-8"))

    def load_sampler(self, key: str | None = None) -> GanSampler:
        key = key or self.config.checkpoint
        self._read_input(key, "checkpoint")
        return GanSampler.from_checkpoint(self.storage, key)

    def training_data(self) -> tuple[SeriesPanel, np.ndarray | None]:
        """The scenario's panel and mask when a scenario is set, else the dataset."""
        if self.config.scenario:
            scenario = self.load_scenario()
            return scenario.panel, scenario.mask
        return self.load_dataset(), None

    # Manifest lifecycle

    def _start(self, command: str, inputs: dict[str, bytes]) -> RunManifest:
        cfg = self.config
        echo = cfg.echo()
        payload = json.dumps(echo, sort_keys=True).encode("utf-8")
        for name in sorted(inputs):
            payload += b"\0" + name.encode("utf-8") + b"\0" + inputs[name]
        input_hash = git_blob_hash(payload)
        run_id = f"{command}-{input_hash[:12]}"
        run_context.set(run_id)
        manifest = RunManifest(
            command=command,
            run_id=run_id,
            run_dir=cfg.output_dir or run_id,
            config=echo,
            seed=cfg.seed,
            input_hash=input_hash,
            inputs={name: git_blob_hash(data) for name, data in sorted(inputs.items())},
            flags={
                "self_attention": cfg.self_attention,
                "fade_in": cfg.fade_in,
                "moment_loss": cfg.moment_loss,
                "context_length": cfg.context_length,
            },
            status=RunStatus.RUNNING,
        )
        self._save_manifest(manifest)
        logger.info(f"Started {command} run in {manifest.run_dir}")
        return manifest

    def _save_manifest(self, manifest: RunManifest) -> str:
        key = f"{manifest.run_dir}/{manifest.command}.manifest.json"
        return self.storage.save(key, _dumps(manifest.model_dump(mode="json")))

    def _execute(self, command: str, inputs: dict[str, bytes], body: Callable[[RunManifest], list[str]]) -> RunManifest:
        manifest = self._start(command, inputs)
        try:
            manifest.outputs = body(manifest)
        except Exception as e:
            logger.exception(f"Run {manifest.run_id} failed")
            manifest.status = RunStatus.FAILED
            manifest.error = str(e)
            self._save_manifest(manifest)
            raise
        if manifest.status == RunStatus.RUNNING:
            manifest.status = RunStatus.COMPLETED
        key = self._save_manifest(manifest)
        logger.info(f"Run {manifest.run_id} {manifest.status.value}, manifest at {self.storage.get_url(key)}")
        return manifest

    # Commands

    def train(self) -> RunManifest:
        cfg = self.config
        inputs = {"dataset": self._dataset_bytes()}
        if cfg.scenario:
            inputs["scenario"] = self._read_input(cfg.scenario, "scenario")

        def body(manifest: RunManifest) -> list[str]:
            panel, mask = self.training_data()
            train_cfg = train_config_from(cfg)
            result = train(
                panel,
                train_cfg,
                gan_config_from(cfg, panel.n_series),
                self.storage,
                manifest.run_dir,
                mask=mask,
                per_series_scaling=cfg.per_series_scaling,
            )
            stages = [
                f"{manifest.run_dir}/checkpoint_stage{event['stage'] - 1}.bin"
                for event in result.grow_events
            ]
            return [result.checkpoint_key, result.metrics_key, *stages]

        return self._execute("train", inputs, body)

    def sample(self) -> RunManifest:
        """Samples every series at each non-overlapping τ window of the training range."""
        cfg = self.config
        inputs = {"checkpoint": self._read_input(cfg.checkpoint, "checkpoint")}

        def body(manifest: RunManifest) -> list[str]:
            sampler = self.load_sampler()
            split = sampler.split_index
            tau = sampler.target_length
            starts = np.asarray(rolling_starts(0, split, tau), dtype=np.int64)
            series = np.repeat(np.arange(sampler.n_series), len(starts))
            starts = np.tile(starts, sampler.n_series)
            if sampler.context_length:
                msg = "sampling a context model needs observed history; use impute or eval instead"
                raise ConfigError(msg)
            values = sampler.sample(series, starts, make_rng(cfg.seed, "sample"))
            key = f"{manifest.run_dir}/samples.bin"
            self.storage.save_bytes(key, encode_samples(SampleSet(series, starts, values)))
            logger.info(f"Wrote {len(series)} samples of length {tau} to {key}")
            return [key]

        return self._execute("sample", inputs, body)

    def _encoder(self, panel: SeriesPanel, mask, run_dir: str) -> tuple[CausalEncoder, str]:
        cfg = self.config
        if cfg.train_encoder:
            encoder = train_encoder(panel, encoder_config_from(cfg), cfg.target_length, mask)
            key = save_encoder(self.storage, f"{run_dir}/encoder.bin", encoder)
            return encoder, key
        return load_encoder(self.storage, cfg.encoder_checkpoint), cfg.encoder_checkpoint

    def score(self) -> RunManifest:
        cfg = self.config
        if cfg.checkpoint is None and cfg.samples is None:
            msg = "score needs checkpoint=<key> or samples=<key>"
            raise ConfigError(msg)
        if not cfg.train_encoder and (
            cfg.encoder_checkpoint is None or not self.storage.exists(cfg.encoder_checkpoint)
        ):
            msg = (
                f"encoder {cfg.encoder_checkpoint or '(none configured)'} not found; "
                "train one with --set train_encoder=true"
            )
            raise MissingEncoderError(msg)
        inputs = {"dataset": self._dataset_bytes()}
        if cfg.samples:
            inputs["samples"] = self._read_input(cfg.samples, "samples")
        else:
            inputs["checkpoint"] = self._read_input(cfg.checkpoint, "checkpoint")
        if not cfg.train_encoder:
            inputs["encoder"] = self.storage.read_bytes(cfg.encoder_checkpoint)
        if cfg.scenario:
            inputs["scenario"] = self._read_input(cfg.scenario, "scenario")

        def body(manifest: RunManifest) -> list[str]:
            panel, mask = self.training_data()
            encoder, encoder_key = self._encoder(panel, mask, manifest.run_dir)
            if cfg.samples:
                report = self._score_samples(encoder, panel, mask, inputs["samples"])
            else:
                report = self._score_checkpoint(encoder, panel, mask)
            document = {**report.to_dict(), "encoder": encoder_key}
            key = self.storage.save(f"{manifest.run_dir}/fid.json", _dumps(document))
            logger.info(
                f"Context-FID {report.mean:.6f} ± {report.std:.6f} over "
                f"{report.n_windows} windows (seed {report.seed})"
            )
            outputs = [key]
            if cfg.train_encoder:
                outputs.append(encoder_key)
            return outputs

        return self._execute("score", inputs, body)

    def _score_samples(
        self, encoder: CausalEncoder, panel: SeriesPanel, mask, data: bytes
    ) -> FidReport:
        samples = decode_samples(data)
        train = panel.raw_values()[:, : panel.split_index]
        if mask is not None:
            train = np.where(mask[:, : panel.split_index], train, np.nan)
        scaler = MinMaxScaler.fit(train, self.config.per_series_scaling)
        real = value_windows(
            scaler.transform(panel.raw_values()), samples.series, samples.starts, samples.window_length
        )
        synthetic = scaler.transform(samples.values.astype(np.float64), samples.series)
        score = context_fid_at(encoder, real, synthetic)
        return FidReport(
            mean=score,
            std=0.0,
            scores=[score],
            n_windows=len(samples),
            window_length=samples.window_length,
            seed=self.config.seed,
            draws=[0],
        )

    def _score_checkpoint(self, encoder: CausalEncoder, panel: SeriesPanel, mask) -> FidReport:
        cfg = self.config
        sampler = self.load_sampler()
        tau = sampler.target_length
        values = sampler.scaler.transform(panel.raw_values())
        pool = admissible_starts(mask, panel.n_series, panel.split_index, tau)

        def synthetic(series: np.ndarray, starts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
            context = None
            if sampler.context_length:
                context = history(values, mask, series, starts, sampler.context_length)
            return sampler.sample_scaled(series, starts, rng, context)

        return context_fid(
            encoder,
            values,
            synthetic,
            pool,
            cfg.n_windows,
            tau,
            seed=cfg.seed,
            draws=cfg.fid_draws,
            workers=settings.eval_workers,
        )

    def impute(self) -> RunManifest:
        cfg = self.config
        inputs = {"scenario": self._read_input(cfg.scenario, "scenario")}
        if cfg.imputer == "gan":
            inputs["checkpoint"] = self._read_input(cfg.checkpoint, "checkpoint")

        def body(manifest: RunManifest) -> list[str]:
            scenario = self.load_scenario()
            if cfg.imputer == "gan":
                completed = gan_impute(self.load_sampler(), scenario, cfg.seed).values
            else:
                completed = moving_average_impute(scenario.panel.raw_values(), scenario.mask)
            key = f"{manifest.run_dir}/completed.jsonl"
            self.storage.save(key, panel_to_jsonlines(scenario.panel, completed))
            return [key]

        return self._execute("impute", inputs, body)

    def scenario(self) -> RunManifest:
        cfg = self.config
        inputs = {"dataset": self._dataset_bytes()}
        if cfg.scenario_kind == "augmentation":
            inputs["checkpoint"] = self._read_input(cfg.checkpoint, "checkpoint")

        def body(manifest: RunManifest) -> list[str]:
            panel = self.load_dataset()
            scenario = self._build_scenario(panel)
            key = f"{manifest.run_dir}/scenario.json"
            self.storage.save(key, scenario_to_json(scenario))
            summary = scenario.manifest().model_dump(mode="json")
            summary_key = self.storage.save(f"{manifest.run_dir}/scenario_manifest.json", _dumps(summary))
            logger.info(
                f"Built {scenario.kind} scenario: missing {scenario.missing_fraction:.2%}, "
                f"{len(scenario.forecast_starts)} forecast windows"
            )
            return [key, summary_key]

        return self._execute("scenario", inputs, body)

    def _build_scenario(self, panel: SeriesPanel) -> ScenarioDataset:
        cfg = self.config
        if cfg.scenario_kind == "far_forecast":
            return make_far_forecast_scenario(panel, cfg.forecast_window, cfg.forecast_windows, cfg.seed)
        if cfg.scenario_kind == "stretch":
            return make_stretch_scenario(
                panel, cfg.stretch_length, cfg.seed, cfg.forecast_window, cfg.forecast_windows
            )
        if cfg.scenario_kind == "cold_start":
            return make_cold_start_scenario(panel, cfg.cold_start_fraction, cfg.seed)
        sampler = self.load_sampler()
        rng = make_rng(cfg.seed, "augmentation")
        return make_augmentation_scenario(
            panel,
            lambda series, starts: sampler.sample(series, starts, rng),
            sampler.target_length,
            cfg.seed,
        )

    def evaluate(self) -> tuple[RunManifest, EvalSummary]:
        cfg = self.config
        unknown = sorted(set(cfg.eval_baselines) - set(BASELINES))
        if unknown:
            msg = f"unknown baselines {unknown}; expected a subset of {list(BASELINES)}"
            raise ConfigError(msg)
        if not cfg.eval_checkpoints and not cfg.eval_baselines:
            msg = "eval needs eval_checkpoints and/or eval_baselines"
            raise ConfigError(msg)
        missing = [key for key in cfg.eval_checkpoints if not self.storage.exists(key)]
        if missing:
            msg = f"missing checkpoints: {', '.join(missing)}"
            raise MissingDependencyError(msg)
        inputs = {"scenario": self._read_input(cfg.scenario, "scenario")}
        inputs.update({f"checkpoint:{key}": self.storage.read_bytes(key) for key in cfg.eval_checkpoints})
        result: dict[str, EvalSummary] = {}

        def body(manifest: RunManifest) -> list[str]:
            scenario = self.load_scenario()
            models = [EvalModel(key, "gan", self.load_sampler(key)) for key in cfg.eval_checkpoints]
            models += [EvalModel(name, name) for name in cfg.eval_baselines]
            summary = run_scenario_eval(
                scenario,
                models,
                [int(seed) for seed in cfg.eval_seeds],
                n_samples=cfg.n_samples,
                horizon=cfg.forecast_window,
                workers=settings.eval_workers,
                scenario_ref=cfg.scenario,
            )
            result["summary"] = summary
            saved = self.storage.save_multiple(
                {
                    f"{manifest.run_dir}/report.json": _dumps(summary.model_dump(mode="json")),
                    f"{manifest.run_dir}/per_window.csv": per_window_csv(summary),
                }
            )
            if summary.failed:
                manifest.status = RunStatus.FAILED
                manifest.error = f"{len(summary.failures)} of {len(summary.reports)} evaluations failed"
            return list(saved.values())

        manifest = self._execute("eval", inputs, body)
        return manifest, result["summary"]


def replay(storage: Storage, manifest_key: str) -> tuple[RunManifest, bool]:
    """
    Rerun a manifest's command with its recorded config.

    Returns the new manifest and whether every output came out byte-identical.
    """
    text = storage.read(manifest_key)
    if text is None:
        msg = f"manifest {manifest_key} does not exist"
        raise MissingDependencyError(msg)
    previous = RunManifest.model_validate_json(text)
    before = {key: storage.read_bytes(key) for key in previous.outputs}
    result = RunService(storage, RunConfig(**previous.config)).run(previous.command)
    manifest = result[0] if isinstance(result, tuple) else result
    if manifest.input_hash != previous.input_hash:
        logger.warning(f"Inputs of {previous.run_id} changed since it ran")
    changed = [
        key
        for key, data in before.items()
        if storage.read_bytes(key.replace(previous.run_dir, manifest.run_dir, 1)) != data
    ]
    if changed:
        logger.warning(f"Replay of {previous.run_id} changed outputs: {changed}")
    else:
        logger.info(f"Replay of {previous.run_id} reproduced {len(before)} outputs")
    return manifest, not changed
