import pytest

from brtpf.server import ServerConfig, ServerHandle
from brtpf.store import Dataset
from brtpf.terms import Triple, iri


@pytest.fixture
def abc_dataset():
    p = iri("urn:p")
    return Dataset(
        [
            Triple(iri("urn:a"), p, iri("urn:e1")),
            Triple(iri("urn:b"), p, iri("urn:e2")),
            Triple(iri("urn:c"), p, iri("urn:e3")),
        ]
    )


@pytest.fixture
def http_server():
    """Factory for background HTTP servers; everything started is torn down."""
    handles = []

    def start(dataset, **config_kw):
        handle = ServerHandle(dataset, ServerConfig(**config_kw))
        handles.append(handle)
        return handle

    yield start
    for handle in handles:
        handle.shutdown()
