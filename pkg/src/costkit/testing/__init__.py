"""Offline test doubles: a scriptable chat-completions server and a
deterministic domain model for recording fixture cassettes."""

from costkit.testing.scripted import ScriptedDomainModel
from costkit.testing.stub_server import StubLLMServer

__all__ = ["ScriptedDomainModel", "StubLLMServer"]
