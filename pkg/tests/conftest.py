import pytest

from streams2s.harness.corpus import generate_corpus
from streams2s.harness.toy_model import build_toy_model
from streams2s.models.common import EncoderPolicy
from streams2s.models.config import CorpusConfig, EncoderConfig, ModelConfig


@pytest.fixture(scope="session")
def corpus_config():
    return CorpusConfig(seed=7, count=8, min_duration_ms=2000, max_duration_ms=4000)


@pytest.fixture(scope="session")
def small_corpus(corpus_config):
    return generate_corpus(corpus_config)


@pytest.fixture(scope="session")
def toy_model():
    return build_toy_model(0)


@pytest.fixture(scope="session")
def uni_model():
    cfg = ModelConfig(encoder=EncoderConfig(policy=EncoderPolicy.UNIDIRECTIONAL))
    return build_toy_model(0, cfg)


@pytest.fixture(scope="session")
def acceptance_corpus():
    """100 short utterances for the corpus-level trend checks."""
    return generate_corpus(CorpusConfig(seed=11, count=100, min_duration_ms=2000, max_duration_ms=4000))
