"""
API Tests for the HTTP Surface

Tests cover:
- Service metadata endpoints
- Run endpoints and their mode handling
- Density evaluation
"""
import math

import pytest
from fastapi.testclient import TestClient

from app import __version__
from app.main import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


class TestMetadata:
    """Test root and health endpoints."""

    def test_root(self, client):
        response = client.get("/")
        assert response.status_code == 200
        assert response.json()["version"] == __version__

    def test_health(self, client):
        assert client.get("/health").json() == {"status": "healthy"}


class TestRunEndpoints:
    """Test run endpoints."""

    def test_analyze(self, client):
        body = {
            "state": {"kind": "mixed_xp"},
            "fill": {"kind": "naive"},
            "criterion": {"criterion": "coarse_variance"},
            "mode": "sweep_bins",
            "sweep": {"values": [32]},
        }
        response = client.post("/runs/analyze", json=body)
        assert response.status_code == 200
        report = response.json()
        assert report["config"]["mode"] == "analyze"
        assert report["criterion"]["entanglement_verified"] is True
        assert {b["basis"] for b in report["bases"]} == {"X", "P"}

    def test_sweep_requires_sweep_mode(self, client):
        response = client.post("/runs/sweep", json={"mode": "analyze"})
        assert response.status_code == 422

    def test_sweep(self, client):
        body = {"mode": "sweep_bins", "sweep": {"values": [2, 16]}, "criterion": {"criterion": "coarse_variance"}}
        response = client.post("/runs/sweep", json=body)
        assert response.status_code == 200
        assert [row["parameter"] for row in response.json()["sweep_rows"]] == [2.0, 16.0]

    def test_sample_requires_sample_section(self, client):
        assert client.post("/runs/sample", json={}).status_code == 422

    def test_sample(self, client):
        body = {"sample": {"n": 2000, "seed": 4}, "criterion": {"criterion": "coarse_variance"}}
        response = client.post("/runs/sample", json=body)
        assert response.status_code == 200
        report = response.json()
        assert report["config"]["mode"] == "sample"
        assert report["analytic_comparison"] is not None

    def test_invalid_config_rejected(self, client):
        response = client.post("/runs/analyze", json={"grid_x": {"lo": 1.0, "hi": -1.0}})
        assert response.status_code == 422


class TestDensityEndpoint:
    """Test density evaluation."""

    def test_vacuum_density(self, client):
        body = {"state": {"kind": "pure_product"}, "basis": "P", "xs": [0.0, 1.0], "ys": [0.0]}
        response = client.post("/states/density", json=body)
        assert response.status_code == 200
        density = response.json()["density"]
        assert density[0][0] == pytest.approx(1.0 / math.pi, rel=1e-12)
        assert density[1][0] == pytest.approx(math.exp(-1.0) / math.pi, rel=1e-12)

    def test_empty_axis_rejected(self, client):
        body = {"state": {"kind": "pure_product"}, "xs": [], "ys": [0.0]}
        assert client.post("/states/density", json=body).status_code == 422
