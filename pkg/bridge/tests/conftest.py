import pytest
from fastapi.testclient import TestClient

from tablebridge import BridgeConfig, create_app


@pytest.fixture
def client() -> TestClient:
    return TestClient(create_app(BridgeConfig()))


@pytest.fixture
def small_batch_client() -> TestClient:
    app = create_app(BridgeConfig(max_batch=2))
    client = TestClient(app)
    client.app_state = app.state
    return client
