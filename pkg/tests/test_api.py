import asyncio
import time

import pytest

from parapif.commands import router as router_module
from parapif.errors import ConfigurationError, NumericError
from parapif.runs import RunRegistry
from parapif.schemas import RunConfig
from parapif.services import RunService


def _payload(**overrides):
    payload = {
        "mode": "serial",
        "particles_per_cell": 1,
        "scenario": {"kind": "landau_damping"},
        "fine": {"scheme": "pif_nudft", "modes": 4, "dt": 0.1},
        "time": {"t_end": 0.2, "subdomains": 2},
    }
    payload.update(overrides)
    return payload


def _service(tmp_path):
    return RunService(RunRegistry(), tmp_path / "runs")


def test_submit_without_event_loop_runs_in_place(tmp_path):
    service = _service(tmp_path)
    record = service.submit(RunConfig.model_validate(_payload()))
    assert record.status == "succeeded"
    assert record.exit_code == 0
    assert (record.output_dir / "manifest.json").exists()
    assert service.get(record.run_id) is record
    assert [r.run_id for r in service.list_runs()] == [record.run_id]


def test_inconsistent_config_is_rejected_before_queueing(tmp_path):
    service = _service(tmp_path)
    config = RunConfig.model_validate(_payload(mode="parareal"))
    with pytest.raises(ConfigurationError) as info:
        service.submit(config)
    assert info.value.keys == ("coarse",)
    assert service.list_runs() == []


def test_failed_run_carries_the_error_category(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise NumericError("diverged")

    monkeypatch.setattr(router_module, "propagate", broken)
    record = _service(tmp_path).submit(RunConfig.model_validate(_payload()))
    assert record.status == "failed"
    assert record.exit_code == 3
    assert record.error_category == "numeric"
    assert record.error_message == "diverged"
    info = record.info()
    assert info.errorCategory == "numeric"
    assert info.mode == "serial"


@pytest.mark.asyncio
async def test_runs_are_drained_off_the_event_loop(tmp_path):
    service = _service(tmp_path)
    first = service.submit(RunConfig.model_validate(_payload(seed=1)))
    second = service.submit(RunConfig.model_validate(_payload(seed=2)))
    assert first.status == "queued"
    await asyncio.wait_for(service.queue.join(), timeout=60)
    assert first.status == second.status == "succeeded"
    assert first.output_dir != second.output_dir


def test_http_endpoints(tmp_path):
    pytest.importorskip("httpx")
    from fastapi.testclient import TestClient

    from parapif.main import create_app

    app = create_app(tmp_path / "runs")
    with TestClient(app) as client:
        response = client.post("/api/runs", json=_payload())
        assert response.status_code == 202
        run_id = response.json()["runId"]

        deadline = time.monotonic() + 60
        while True:
            info = client.get(f"/api/runs/{run_id}").json()
            if info["status"] not in ("queued", "running") or time.monotonic() > deadline:
                break
            time.sleep(0.05)
        assert info["status"] == "succeeded"
        assert info["exitCode"] == 0

        listing = client.get("/api/runs").json()
        assert [r["runId"] for r in listing["runs"]] == [run_id]

        assert client.get("/api/runs/missing").status_code == 404
        rejected = client.post("/api/runs", json=_payload(mode="parareal"))
        assert rejected.status_code == 422
        assert rejected.json()["detail"][0]["loc"] == ["coarse"]
        assert client.post("/api/runs", json=_payload(fine={"scheme": "pic", "modes": 6})).status_code == 422
