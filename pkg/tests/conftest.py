import numpy as np
import pytest

from regprompt3d.encoders import DualEncoder, EncoderConfig
from regprompt3d.harness.features import TokenCache
from regprompt3d.harness.surrogate import build_vocabulary, get_surrogate

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

TINY = EncoderConfig(dim=16, feat_dim=16, n_blocks=3, n_heads=4, mlp_ratio=2, n_patches=8, k_neighbors=8)


@pytest.fixture(scope="session")
def vocab():
    return build_vocabulary()


@pytest.fixture(scope="session")
def tiny_encoder(vocab):
    """Small random encoder for fast structural tests (not pre-trained)."""
    return DualEncoder.init(TINY, vocab, seed=0).freeze()


@pytest.fixture(scope="session")
def surrogate():
    """The cached pre-trained frozen surrogate (built on first use, about 6 min)."""
    return get_surrogate()


@pytest.fixture(scope="session")
def surrogate_cache(surrogate):
    return TokenCache(surrogate)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
