import io
import logging

import pytest

from s2spm.config import ALL_DEFAULTS, TRAIN_DEFAULTS, load_config, resolve
from s2spm.errors import DomainError
from s2spm.logs import get_logger


def test_published_defaults():
    assert TRAIN_DEFAULTS["k_pos"] == TRAIN_DEFAULTS["k_neg"] == 8
    assert TRAIN_DEFAULTS["lr"] == 0.05
    assert TRAIN_DEFAULTS["iterations"] == 5000
    assert ALL_DEFAULTS["min_proteins"] == 20
    assert ALL_DEFAULTS["n_perm"] == 100


class TestLoadConfig:
    def test_none(self):
        assert load_config(None) == {}

    def test_flat_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('k_pos = 4\nsampling = "sampled"\nalpha = 0.01\n')
        assert load_config(path) == {"k_pos": 4, "sampling": "sampled", "alpha": 0.01}

    @pytest.mark.parametrize("text", ["[train]\nk_pos = 4\n", "epochs = 10\n", "k_pos = = 4\n"])
    def test_rejected(self, tmp_path, text):
        path = tmp_path / "run.toml"
        path.write_text(text)
        with pytest.raises(DomainError):
            load_config(path)


def test_resolution_order():
    resolved = resolve(ALL_DEFAULTS, {"k_pos": 4, "lr": 0.01}, {"k_pos": 6, "lr": None, "unknown": 1})
    assert resolved["k_pos"] == 6
    assert resolved["lr"] == 0.01
    assert resolved["iterations"] == 5000
    assert "unknown" not in resolved


def test_logger_tags_messages():
    stream = io.StringIO()
    handler = logging.StreamHandler(stream)
    handler.setFormatter(logging.Formatter("[%(tag)s] %(message)s"))
    base = logging.getLogger("s2spm.train")
    base.addHandler(handler)
    base.setLevel(logging.INFO)
    try:
        get_logger("train").info("Training successful")
    finally:
        base.removeHandler(handler)
        base.setLevel(logging.NOTSET)
    assert stream.getvalue() == "[TRAIN] Training successful\n"
