"""HTTP API over the chat loop: sessions, messages, contracts and the
confirmation gate.

The default backend is a deterministic command backend (``/call Tool
{json}`` runs a tool directly), so the whole service works offline; a
live chat-completions backend can be configured instead. API and CLI
share the same kernels, so verdicts are byte-identical across surfaces.
"""

from __future__ import annotations

import json
import time
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..model import NetworkError, loads_network_str
from ..orchestrator import (
    BackendDecision,
    ChatContext,
    LiveBackend,
    Orchestrator,
    VerdictRecord,
)
from ..tools import default_setup
from .config import ServiceConfig
from .stores import JsonlStore

__all__ = ["create_app", "CommandBackend"]

# tool -> contract kind for records created from feasible verdicts
CONTRACT_KINDS = {
    "DevelopContract": "residential",
    "Contracting": "residential",
    "MVContractPlanner": "mv-connection",
    "OutagePlanner": "outage-slot",
}


class CommandBackend:
    """Deterministic offline backend.

    A user message ``/call ToolName {"arg": 1}`` becomes that tool call;
    after a tool result the backend relays the result text verbatim. Any
    other message gets a canned reply listing the available tools.
    """

    def decide(self, messages: list[dict], tools: list[dict]) -> BackendDecision:
        last_user = max(i for i, m in enumerate(messages) if m["role"] == "user")
        after = messages[last_user + 1:]
        if after and after[-1]["role"] == "tool":
            return BackendDecision.final_text(after[-1]["content"])
        text = messages[last_user]["content"].strip()
        if text.startswith("/call "):
            rest = text[len("/call "):].strip()
            name, _, argstr = rest.partition(" ")
            try:
                args = json.loads(argstr) if argstr.strip() else {}
            except json.JSONDecodeError:
                return BackendDecision.final_text(
                    "I could not parse the tool arguments as JSON."
                )
            return BackendDecision.tool_call(name, args)
        names = ", ".join(t["function"]["name"] for t in tools)
        return BackendDecision.final_text(
            f"Available tools: {names}. Use /call ToolName {{json arguments}}."
        )


def _problem(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={
            "type": "about:blank",
            "title": code.replace("_", " "),
            "status": status,
            "code": code,
            "detail": detail,
        },
        media_type="application/problem+json",
    )


def create_app(config: ServiceConfig | None = None, backend: Any = None) -> FastAPI:
    config = config or ServiceConfig()
    registry, personas, _draft_store = default_setup()
    if backend is None:
        if config.backend_kind == "live":
            backend = LiveBackend(
                config.backend_endpoint, config.backend_api_key,
                config.backend_model, config.backend_temperature,
            )
        else:
            backend = CommandBackend()
    orch = Orchestrator(registry, personas, backend)

    data = config.data_dir
    session_store = JsonlStore(data / "sessions.jsonl")
    contract_store = JsonlStore(data / "contracts.jsonl")
    trace_store = JsonlStore(data / "traces.jsonl")

    sessions: dict[str, dict] = {}
    contracts: dict[str, dict] = {}
    counters = {"session": 0, "contract": 0}

    def _replay():
        for ev in session_store.load():
            t = ev.get("t")
            if t == "session_created":
                sessions[ev["id"]] = {
                    "id": ev["id"], "persona": ev["persona"],
                    "created_at": ev["created_at"], "status": "open",
                    "ctx": ChatContext(ev["id"], ev["persona"]),
                }
                counters["session"] = max(counters["session"], int(ev["id"][1:]))
            elif t == "entry" and ev["session"] in sessions:
                sessions[ev["session"]]["ctx"].entries.append(ev["entry"])
            elif t == "verdict" and ev["session"] in sessions:
                sessions[ev["session"]]["ctx"].verdicts.append(VerdictRecord(
                    tool=ev["tool"], arguments=ev["arguments"], beta=ev["beta"],
                    feasible=ev["feasible"], token=ev["token"],
                ))
            elif t == "session_closed" and ev["session"] in sessions:
                sessions[ev["session"]]["status"] = "closed"
        for ev in contract_store.load():
            t = ev.get("t")
            if t == "contract_drafted":
                contracts[ev["id"]] = {k: v for k, v in ev.items() if k != "t"}
                counters["contract"] = max(counters["contract"], int(ev["id"][1:]))
            elif t == "contract_confirmed" and ev["id"] in contracts:
                contracts[ev["id"]]["status"] = "confirmed"
                contracts[ev["id"]]["confirmed_at"] = ev["confirmed_at"]

    _replay()

    app = FastAPI(title="gridchat", version="1.0")
    app.state.config = config
    app.state.sessions = sessions
    app.state.contracts = contracts
    app.state.store_warnings = session_store.warnings + contract_store.warnings

    @app.get("/health")
    def health():
        reachable = True
        if isinstance(backend, LiveBackend):
            import httpx

            try:
                httpx.get(backend.endpoint, timeout=2.0)
            except httpx.HTTPError:
                reachable = False
        return {
            "status": "ok",
            "backend": type(backend).__name__,
            "backend_reachable": reachable,
            "sessions": len(sessions),
            "store_warnings": app.state.store_warnings,
        }

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        persona = body.get("persona", "")
        if persona not in personas:
            return _problem(400, "unknown_persona",
                            f"persona must be one of {sorted(personas)}")
        open_count = sum(1 for s in sessions.values() if s["status"] == "open")
        if open_count >= config.max_sessions:
            return _problem(409, "session_pool_full",
                            f"at most {config.max_sessions} open sessions")
        counters["session"] += 1
        sid = f"s{counters['session']}"
        record = {
            "id": sid, "persona": persona, "created_at": time.time(),
            "status": "open", "ctx": ChatContext(sid, persona),
        }
        sessions[sid] = record
        session_store.append({
            "t": "session_created", "id": sid, "persona": persona,
            "created_at": record["created_at"],
        })
        return {"id": sid, "persona": persona}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        if sid not in sessions:
            return _problem(404, "unknown_session", f"no session {sid}")
        s = sessions[sid]
        return {
            "id": sid, "persona": s["persona"], "status": s["status"],
            "created_at": s["created_at"], "transcript": s["ctx"].entries,
        }

    @app.post("/sessions/{sid}/messages")
    async def post_message(sid: str, request: Request):
        if sid not in sessions:
            return _problem(404, "unknown_session", f"no session {sid}")
        s = sessions[sid]
        if s["status"] != "open":
            return _problem(409, "session_closed", f"session {sid} is closed")
        body = await request.json()
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            return _problem(400, "invalid_message", "body must carry non-empty text")
        ctx: ChatContext = s["ctx"]
        n_entries = len(ctx.entries)
        n_verdicts = len(ctx.verdicts)
        try:
            response, trace = orch.step(ctx, text)
        except ConnectionError as exc:
            return _problem(502, "backend_transport", str(exc))
        for entry in ctx.entries[n_entries:]:
            session_store.append({"t": "entry", "session": sid, "entry": entry})

        trace_id = f"{sid}-t{sum(1 for e in ctx.entries if e['role'] == 'user')}"
        for event in trace:
            trace_store.append({"trace_id": trace_id, "session": sid, **event})

        new_contracts = []
        for v in ctx.verdicts[n_verdicts:]:
            session_store.append({
                "t": "verdict", "session": sid, "tool": v.tool,
                "arguments": v.arguments, "beta": v.beta,
                "feasible": v.feasible, "token": v.token,
            })
            if v.feasible and v.tool in CONTRACT_KINDS:
                counters["contract"] += 1
                cid = f"c{counters['contract']}"
                record = {
                    "id": cid, "kind": CONTRACT_KINDS[v.tool],
                    "terms": {"tool": v.tool, "arguments": v.arguments,
                              "beta": v.beta},
                    "token": v.token, "session": sid, "status": "draft",
                    "created_at": time.time(),
                }
                contracts[cid] = record
                contract_store.append({"t": "contract_drafted", **record})
                new_contracts.append({"id": cid, "kind": record["kind"],
                                      "status": "draft"})
        return {
            "response": response, "trace_id": trace_id, "trace": trace,
            "new_contracts": new_contracts,
        }

    @app.get("/contracts")
    def list_contracts():
        return {"contracts": sorted(contracts.values(), key=lambda c: c["id"])}

    @app.post("/contracts/{cid}/confirm")
    def confirm_contract(cid: str):
        if cid not in contracts:
            return _problem(404, "unknown_contract", f"no contract {cid}")
        record = contracts[cid]
        if record["status"] == "confirmed":
            return {"id": cid, "status": "confirmed"}
        sid = record["session"]
        if sid not in sessions:
            return _problem(409, "gate_refused", "originating session is gone")
        result = orch.issue_gate(sessions[sid]["ctx"], record["token"])
        if not result.granted:
            return _problem(409, "gate_refused", result.reason)
        record["status"] = "confirmed"
        record["confirmed_at"] = time.time()
        record["issuance_token"] = result.issuance_token
        contract_store.append(
            {"t": "contract_confirmed", "id": cid,
             "confirmed_at": record["confirmed_at"],
             "issuance_token": result.issuance_token},
            fsync=True,
        )
        return {"id": cid, "status": "confirmed",
                "issuance_token": result.issuance_token}

    @app.post("/networks", status_code=201)
    async def ingest_network(request: Request):
        body = await request.json()
        name = body.get("name", "")
        if not name or not name.replace("-", "").replace("_", "").isalnum():
            return _problem(400, "invalid_name", "network name must be alphanumeric")
        try:
            net = loads_network_str(json.dumps(body.get("network", {})))
        except NetworkError as exc:
            return _problem(400, "invalid_network", str(exc))
        dest = data / "networks" / f"{name}.json"
        dest.parent.mkdir(parents=True, exist_ok=True)
        from ..model import serialize

        dest.write_text(serialize(net))
        return {"name": name, "buses": net.n_bus, "path": str(dest)}

    return app
