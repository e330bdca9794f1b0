import pytest

from costkit.builder import BuildContext
from costkit.client import Cassette, LLMClient, MODE_RECORD, RetryPolicy
from costkit.testing import ScriptedDomainModel, StubLLMServer

FIXED_CLOCK = "2024-01-01T00:00:00Z"


@pytest.fixture(scope="session")
def scripted_stub():
    with StubLLMServer(ScriptedDomainModel(noise_rate=0.08).respond) as stub:
        yield stub


@pytest.fixture()
def recording_ctx(scripted_stub, tmp_path):
    """A BuildContext recording against the scripted stub, with a fixed clock."""
    client = LLMClient(
        base_url=scripted_stub.url,
        retry=RetryPolicy(base_s=0.001, max_attempts=3),
        sleeper=lambda s: None,
    )
    cassette = Cassette(MODE_RECORD, path=tmp_path / "cassette.json")
    return BuildContext(
        client=client,
        cassette=cassette,
        model_id="scripted-model",
        clock=lambda: FIXED_CLOCK,
    )
