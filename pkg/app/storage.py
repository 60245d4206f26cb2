"""Run artifact storage - local directory for desk runs, S3 for shared results."""

import logging
from abc import ABC, abstractmethod
from pathlib import Path

import boto3
from botocore.config import Config
from botocore.exceptions import ClientError

from app.config import settings

__all__ = ["LocalStorage", "S3Storage", "Storage", "get_storage"]

logger = logging.getLogger(__name__)


class Storage(ABC):
    @abstractmethod
    def save_bytes(self, key: str, data: bytes) -> str:
        """Save binary content and return the key."""
        ...

    @abstractmethod
    def read_bytes(self, key: str) -> bytes | None:
        """Read binary content by key, None if absent."""
        ...

    @abstractmethod
    def get_url(self, key: str) -> str:
        """Location a user can fetch the artifact from."""
        ...

    def save(self, key: str, content: str) -> str:
        return self.save_bytes(key, content.encode("utf-8"))

    def read(self, key: str) -> str | None:
        data = self.read_bytes(key)
        return None if data is None else data.decode("utf-8")

    def exists(self, key: str) -> bool:
        return self.read_bytes(key) is not None

    def append(self, key: str, content: str) -> str:
        """Append text to an object; line-delimited logs use this."""
        return self.save(key, (self.read(key) or "") + content)

    def save_multiple(self, files: dict[str, str]) -> dict[str, str]:
        """
        Save several text artifacts at once.

        Args:
            files: Mapping of key to content, e.g.
                   {"train-ab12/manifest.json": "...", "train-ab12/metrics.jsonl": "..."}

        Returns:
            Mapping of the same names to storage keys
        """
        return {name: self.save(name, content) for name, content in files.items()}


class LocalStorage(Storage):
    """Filesystem storage rooted at the outputs directory."""

    def __init__(self, base_dir: Path):
        self.base_dir = base_dir
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def _safe_path(self, key: str) -> Path:
        """Validate key doesn't escape base_dir via path traversal."""
        path = (self.base_dir / key).resolve()
        base = self.base_dir.resolve()
        if not path.is_relative_to(base):
            msg = f"Invalid key: {key}"
            raise ValueError(msg)
        return path

    def save_bytes(self, key: str, data: bytes) -> str:
        path = self._safe_path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        return key

    def read_bytes(self, key: str) -> bytes | None:
        path = self._safe_path(key)
        if path.is_file():
            return path.read_bytes()
        return None

    def exists(self, key: str) -> bool:
        return self._safe_path(key).is_file()

    def append(self, key: str, content: str) -> str:
        path = self._safe_path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as fh:
            fh.write(content)
        return key

    def get_url(self, key: str) -> str:
        return str(self._safe_path(key))


class S3Storage(Storage):
    """S3-compatible storage (AWS S3, Cloudflare R2, MinIO)."""

    def __init__(
        self,
        bucket: str,
        endpoint_url: str | None = None,
        access_key: str | None = None,
        secret_key: str | None = None,
    ):
        self.bucket = bucket
        self.s3 = boto3.client(
            "s3",
            endpoint_url=endpoint_url,
            aws_access_key_id=access_key,
            aws_secret_access_key=secret_key,
            config=Config(signature_version="s3v4"),
        )

    def save_bytes(self, key: str, data: bytes) -> str:
        self.s3.put_object(
            Bucket=self.bucket,
            Key=key,
            Body=data,
            ContentType="application/octet-stream",
        )
        logger.info(f"Saved artifact to S3: {key}")
        return key

    def read_bytes(self, key: str) -> bytes | None:
        try:
            response = self.s3.get_object(Bucket=self.bucket, Key=key)
            return response["Body"].read()
        except ClientError as e:
            if e.response["Error"]["Code"] == "NoSuchKey":
                return None
            raise

    def get_url(self, key: str) -> str:
        # Presigned URL valid for 1 hour
        return self.s3.generate_presigned_url(
            "get_object",
            Params={"Bucket": self.bucket, "Key": key},
            ExpiresIn=3600,
        )


def get_storage() -> Storage:
    """Factory function - swap implementation via config."""
    if settings.storage_type == "s3":
        return S3Storage(
            bucket=settings.s3_bucket,
            endpoint_url=settings.s3_endpoint_url,
            access_key=settings.s3_access_key,
            secret_key=settings.s3_secret_key,
        )
    return LocalStorage(Path(settings.outputs_dir))
