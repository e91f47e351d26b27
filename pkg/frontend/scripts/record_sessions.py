"""Record three end-to-end sessions against the real service for UI tests.

Writes one JSON file per session into frontend/tests/fixtures/, each a
list of {request, response} exchanges exactly as they went over HTTP.
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from gridchat.fixtures import GRID9G_CONTINGENCIES, grid9g, grid9g_calendar
from gridchat.scopf import OutageRequest, feasibility_map, plan_outage
from gridchat.service import ServiceConfig, create_app

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


class Recorder:
    def __init__(self, client):
        self.client = client
        self.exchanges = []

    def post(self, path, body=None):
        r = self.client.post(path, json=body)
        self.exchanges.append({
            "request": {"method": "POST", "path": path, "body": body},
            "response": {"status": r.status_code, "body": r.json()},
        })
        return r.json(), r.status_code

    def get(self, path):
        r = self.client.get(path)
        self.exchanges.append({
            "request": {"method": "GET", "path": path, "body": None},
            "response": {"status": r.status_code, "body": r.json()},
        })
        return r.json(), r.status_code

    def save(self, name):
        (OUT / name).write_text(json.dumps(self.exchanges, indent=1))
        print(f"wrote {name}: {len(self.exchanges)} exchanges")


def call(rec, sid, tool, args):
    return rec.post(f"/sessions/{sid}/messages",
                    {"text": f"/call {tool} {json.dumps(args)}"})


def record_residential(client):
    rec = Recorder(client)
    doc, _ = rec.post("/sessions", {"persona": "residential"})
    sid = doc["id"]
    doc, _ = call(rec, sid, "ElectricityConsumption",
                  {"washing_hours": 1, "tv_hours": 3, "ev_hours": 2, "ev_start": 2})
    executed = [e for e in doc["trace"] if e["event"] == "tool_executed"]
    profile = executed[0]["beta"]["profile"]
    doc, _ = call(rec, sid, "DevelopContract",
                  {"profile": profile, "ev_start": 2, "ev_hours": 2})
    executed = [e for e in doc["trace"] if e["event"] == "tool_executed"]
    token = executed[0]["beta"]["verdict_token"]
    cid = doc["new_contracts"][0]["id"]
    call(rec, sid, "Contracting", {"verdict_token": token})
    rec.post(f"/contracts/{cid}/confirm")
    rec.get(f"/sessions/{sid}")
    rec.save("session_residential.json")


def record_mv(client):
    rec = Recorder(client)
    doc, _ = rec.post("/sessions", {"persona": "dso"})
    sid = doc["id"]
    # 2 MW flat at the weak bus: infeasible at hour 19
    call(rec, sid, "MVContractPlanner", {"zip": 11, "profile": [2.0] * 24})
    # adjusted request stays within limits
    doc, _ = call(rec, sid, "MVContractPlanner", {"zip": 11, "profile": [0.5] * 24})
    cid = doc["new_contracts"][0]["id"]
    # a stale token must be refused by the gate before the real confirm
    client.app.state.contracts[cid]["token"], real = (
        "0" * 64, client.app.state.contracts[cid]["token"])
    rec.post(f"/contracts/{cid}/confirm")
    client.app.state.contracts[cid]["token"] = real
    rec.post(f"/contracts/{cid}/confirm")
    rec.get("/contracts")
    rec.save("session_mv.json")


def record_outage(client):
    grid, cal = grid9g(), grid9g_calendar()
    fmap = feasibility_map(grid, cal, 1, 7, GRID9G_CONTINGENCIES)
    bad_start = int(next(i for i, ok in enumerate(fmap) if not ok))
    alt = plan_outage(grid, cal,
                      OutageRequest(start_day=bad_start, duration_days=7, asset=1),
                      GRID9G_CONTINGENCIES).alternative_start

    rec = Recorder(client)
    doc, _ = rec.post("/sessions", {"persona": "tso"})
    sid = doc["id"]
    call(rec, sid, "OutagePlanner",
         {"asset": 1, "start_day": bad_start, "duration_days": 7})
    doc, _ = call(rec, sid, "OutagePlanner",
                  {"asset": 1, "start_day": alt, "duration_days": 7})
    cid = doc["new_contracts"][0]["id"]
    rec.post(f"/contracts/{cid}/confirm")
    rec.save("session_outage.json")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        client = TestClient(create_app(ServiceConfig(data_dir=Path(tmp))))
        record_residential(client)
        record_mv(client)
        record_outage(client)


if __name__ == "__main__":
    main()
