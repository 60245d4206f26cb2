"""Unit tests for Storage implementations."""

import tempfile
from pathlib import Path
from unittest.mock import MagicMock, patch

import pytest
from botocore.exceptions import ClientError

from app.storage import LocalStorage, S3Storage


def test_local_storage_save():
    """LocalStorage.save creates nested directories and the file."""
    with tempfile.TemporaryDirectory() as tmpdir:
        storage = LocalStorage(Path(tmpdir))
        key = storage.save("train-ab12/metrics.jsonl", "{}\n")

        assert key == "train-ab12/metrics.jsonl"
        assert (Path(tmpdir) / "train-ab12" / "metrics.jsonl").read_text() == "{}\n"


def test_local_storage_bytes_roundtrip():
    """Binary artifacts come back unchanged."""
    with tempfile.TemporaryDirectory() as tmpdir:
        storage = LocalStorage(Path(tmpdir))
        payload = bytes(range(256))
        storage.save_bytes("run/checkpoint.bin", payload)

        assert storage.read_bytes("run/checkpoint.bin") == payload
        assert storage.exists("run/checkpoint.bin")


def test_local_storage_missing_key():
    """Absent keys read as None."""
    with tempfile.TemporaryDirectory() as tmpdir:
        storage = LocalStorage(Path(tmpdir))

        assert storage.read("nothing.json") is None
        assert not storage.exists("nothing.json")


def test_local_storage_append():
    """append extends an existing object line by line."""
    with tempfile.TemporaryDirectory() as tmpdir:
        storage = LocalStorage(Path(tmpdir))
        storage.append("run/metrics.jsonl", "a\n")
        storage.append("run/metrics.jsonl", "b\n")

        assert storage.read("run/metrics.jsonl") == "a\nb\n"


def test_local_storage_rejects_traversal():
    """Keys may not escape the outputs directory."""
    with tempfile.TemporaryDirectory() as tmpdir:
        storage = LocalStorage(Path(tmpdir) / "outputs")

        with pytest.raises(ValueError, match="Invalid key"):
            storage.save("../escape.txt", "x")


def test_s3_storage_save():
    """S3Storage.save uploads bytes with an octet-stream content type."""
    with patch("app.storage.boto3.client") as mock_boto:
        mock_s3 = MagicMock()
        mock_boto.return_value = mock_s3

        storage = S3Storage(
            bucket="test-bucket",
            endpoint_url="https://s3.example.com",
            access_key="key",
            secret_key="secret",
        )
        key = storage.save("train-ab12/train.manifest.json", "{}")

        assert key == "train-ab12/train.manifest.json"
        mock_s3.put_object.assert_called_once_with(
            Bucket="test-bucket",
            Key="train-ab12/train.manifest.json",
            Body=b"{}",
            ContentType="application/octet-stream",
        )


def test_s3_storage_read():
    """S3Storage.read returns decoded content."""
    with patch("app.storage.boto3.client") as mock_boto:
        mock_s3 = MagicMock()
        mock_boto.return_value = mock_s3

        mock_body = MagicMock()
        mock_body.read.return_value = b"File content"
        mock_s3.get_object.return_value = {"Body": mock_body}

        storage = S3Storage(bucket="test-bucket")
        content = storage.read("test.txt")

        assert content == "File content"
        mock_s3.get_object.assert_called_once_with(Bucket="test-bucket", Key="test.txt")


def test_s3_storage_read_missing():
    """NoSuchKey maps to None."""
    with patch("app.storage.boto3.client") as mock_boto:
        mock_s3 = MagicMock()
        mock_boto.return_value = mock_s3
        mock_s3.get_object.side_effect = ClientError(
            {"Error": {"Code": "NoSuchKey", "Message": "missing"}}, "GetObject"
        )

        storage = S3Storage(bucket="test-bucket")

        assert storage.read_bytes("absent.bin") is None


def test_save_multiple_returns_keys(storage):
    """Eval writes its report and CSV in one call."""
    keys = storage.save_multiple({"eval-1/report.json": "{}", "eval-1/per_window.csv": "model\n"})

    assert keys == {"eval-1/report.json": "eval-1/report.json", "eval-1/per_window.csv": "eval-1/per_window.csv"}
    assert storage.read("eval-1/per_window.csv") == "model\n"
    assert storage.get_url("eval-1/report.json").endswith("report.json")


def test_s3_append_rewrites_object():
    """S3 has no append; the object is read and written back whole."""
    with patch("app.storage.boto3.client") as mock_boto:
        mock_client = MagicMock()
        mock_boto.return_value = mock_client
        body = MagicMock()
        body.read.return_value = b"a\n"
        mock_client.get_object.return_value = {"Body": body}

        S3Storage(bucket="runs").append("train-ab12/metrics.jsonl", "b\n")

        assert mock_client.put_object.call_args.kwargs["Body"] == b"a\nb\n"


def test_s3_get_url_is_presigned():
    """URLs for shared results are presigned for an hour."""
    with patch("app.storage.boto3.client") as mock_boto:
        mock_client = MagicMock()
        mock_boto.return_value = mock_client
        mock_client.generate_presigned_url.return_value = "https://signed"

        assert S3Storage(bucket="runs").get_url("k") == "https://signed"
        assert mock_client.generate_presigned_url.call_args.kwargs["ExpiresIn"] == 3600  # noqa: PLR2004
