"""Chat-loop engine: tool registry, persona scoping, backend abstraction
and the deterministic contract-issuance gate.

The backend (live model or scripted double) only selects tools and
extracts arguments; every argument is validated against the tool schema
here, every kernel runs here, and nothing the backend asserts in prose
can confirm a contract. Confirmation requires an issuance token that is
granted only after re-executing the stored call and reproducing an
identical feasible verdict.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

__all__ = [
    "ParamSpec",
    "ToolSpec",
    "ToolResult",
    "ToolRegistry",
    "Persona",
    "ChatContext",
    "BackendDecision",
    "VerdictRecord",
    "GateResult",
    "Orchestrator",
    "ScriptedBackend",
    "NoiseSpec",
    "LiveBackend",
    "ScriptExhausted",
    "ToolValidationError",
    "canonical_json",
    "verdict_token",
]

RETRY_ATTEMPTS = 3
RETRY_BACKOFF_S = 0.1
KERNEL_BUDGET_S = 30.0


class ToolValidationError(Exception):
    """Arguments rejected by a tool schema; never reaches a kernel."""


class ScriptExhausted(Exception):
    """A scripted backend ran out of decisions."""


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def verdict_token(tool: str, arguments: dict, beta: Any) -> str:
    payload = canonical_json({"tool": tool, "alpha": arguments, "beta": beta})
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str                       # "integer" | "number" | "number_list" | "string"
    required: bool = True
    minimum: float | None = None
    maximum: float | None = None
    length: int | None = None       # for number_list
    description: str = ""

    def validate(self, raw: Any) -> Any:
        """Coerce and range-check one raw argument; raises on any problem."""
        if self.kind == "integer":
            if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
                raise ToolValidationError(f"{self.name}: expected an integer")
            try:
                value = int(str(raw))
            except ValueError:
                raise ToolValidationError(f"{self.name}: {raw!r} is not an integer")
            self._check_range(value)
            return value
        if self.kind == "number":
            if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
                raise ToolValidationError(f"{self.name}: expected a number")
            try:
                value = float(str(raw))
            except ValueError:
                raise ToolValidationError(f"{self.name}: {raw!r} is not a number")
            self._check_range(value)
            return value
        if self.kind == "number_list":
            if not isinstance(raw, (list, tuple)):
                raise ToolValidationError(f"{self.name}: expected a list of numbers")
            if self.length is not None and len(raw) != self.length:
                raise ToolValidationError(
                    f"{self.name}: expected {self.length} values, got {len(raw)}"
                )
            out = []
            for i, v in enumerate(raw):
                try:
                    x = float(str(v))
                except (ValueError, TypeError):
                    raise ToolValidationError(
                        f"{self.name}[{i}]: {v!r} is not a number"
                    )
                self._check_range(x, at=f"[{i}]")
                out.append(x)
            return out
        if self.kind == "string":
            if not isinstance(raw, str):
                raise ToolValidationError(f"{self.name}: expected a string")
            return raw
        raise ToolValidationError(f"{self.name}: unknown parameter kind {self.kind}")

    def _check_range(self, value: float, at: str = ""):
        if self.minimum is not None and value < self.minimum:
            raise ToolValidationError(
                f"{self.name}{at}: {value} is below the minimum {self.minimum}"
            )
        if self.maximum is not None and value > self.maximum:
            raise ToolValidationError(
                f"{self.name}{at}: {value} is above the maximum {self.maximum}"
            )


@dataclass(frozen=True)
class ToolResult:
    value: Any                       # json-serializable beta
    message: str                     # compact text placed in the chat context
    feasible: bool | None = None     # set by feasibility-producing tools


@dataclass(frozen=True)
class ToolSpec:
    name: str
    instruction: str
    params: tuple[ParamSpec, ...]
    output_name: str
    handler: Callable[..., ToolResult]

    def validate_args(self, raw: dict) -> dict:
        if not isinstance(raw, dict):
            raise ToolValidationError("arguments must be an object")
        known = {p.name for p in self.params}
        extra = set(raw) - known
        if extra:
            raise ToolValidationError(f"unknown parameters: {sorted(extra)}")
        clean = {}
        for p in self.params:
            if p.name not in raw:
                if p.required:
                    raise ToolValidationError(f"{p.name}: required parameter missing")
                continue
            clean[p.name] = p.validate(raw[p.name])
        return clean

    def wire_schema(self) -> dict:
        """Chat-completions style function declaration."""
        props = {}
        required = []
        for p in self.params:
            entry: dict[str, Any] = {"description": p.description}
            if p.kind == "integer":
                entry["type"] = "integer"
            elif p.kind == "number":
                entry["type"] = "number"
            elif p.kind == "number_list":
                entry["type"] = "array"
                entry["items"] = {"type": "number"}
            else:
                entry["type"] = "string"
            if p.minimum is not None:
                entry["minimum"] = p.minimum
            if p.maximum is not None:
                entry["maximum"] = p.maximum
            props[p.name] = entry
            if p.required:
                required.append(p.name)
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.instruction,
                "parameters": {
                    "type": "object",
                    "properties": props,
                    "required": required,
                },
            },
        }


class ToolRegistry:
    def __init__(self):
        self._tools: dict[str, ToolSpec] = {}

    def register_tool(self, spec: ToolSpec):
        if spec.name in self._tools:
            raise ValueError(f"tool {spec.name!r} already registered")
        self._tools[spec.name] = spec

    def get(self, name: str) -> ToolSpec:
        if name not in self._tools:
            raise KeyError(f"unknown tool {name!r}")
        return self._tools[name]

    def list_tools(self, persona: "Persona | None" = None) -> list[ToolSpec]:
        specs = list(self._tools.values())
        if persona is None:
            return specs
        return [s for s in specs if s.name in persona.allowed_tools]

    def __contains__(self, name: str) -> bool:
        return name in self._tools


@dataclass(frozen=True)
class Persona:
    id: str
    system_prompt: str
    allowed_tools: tuple[str, ...]
    temperature: float = 0.0
    model: str = ""


@dataclass(frozen=True)
class BackendDecision:
    kind: str                        # "tool_call" | "final_text"
    name: str | None = None
    arguments: dict | None = None
    text: str | None = None

    @staticmethod
    def tool_call(name: str, arguments: dict) -> "BackendDecision":
        return BackendDecision(kind="tool_call", name=name, arguments=arguments)

    @staticmethod
    def final_text(text: str) -> "BackendDecision":
        return BackendDecision(kind="final_text", text=text)


@dataclass(frozen=True)
class VerdictRecord:
    tool: str
    arguments: dict
    beta: Any
    feasible: bool
    token: str


@dataclass(frozen=True)
class GateResult:
    granted: bool
    issuance_token: str | None
    reason: str


@dataclass
class ChatContext:
    session_id: str
    persona_id: str
    entries: list[dict] = field(default_factory=list)
    verdicts: list[VerdictRecord] = field(default_factory=list)

    def append_user(self, text: str):
        self.entries.append({"role": "user", "content": text})

    def append_assistant(self, text: str):
        self.entries.append({"role": "assistant", "content": text})

    def append_tool(self, name: str, beta_text: str, call_id: str):
        self.entries.append({
            "role": "tool", "name": name, "content": beta_text, "call_id": call_id,
        })


class Backend(Protocol):
    def decide(self, messages: list[dict], tools: list[dict]) -> BackendDecision: ...


class Orchestrator:
    """One chat loop over a registry, a persona set and a backend."""

    def __init__(self, registry: ToolRegistry, personas: dict[str, Persona],
                 backend: Backend, max_tool_calls: int = 16,
                 kernel_budget_s: float = KERNEL_BUDGET_S):
        for p in personas.values():
            missing = [t for t in p.allowed_tools if t not in registry]
            if missing:
                raise ValueError(f"persona {p.id}: unknown tools {missing}")
        self.registry = registry
        self.personas = personas
        self.backend = backend
        self.max_tool_calls = max_tool_calls
        self.kernel_budget_s = kernel_budget_s

    def _backend_messages(self, ctx: ChatContext) -> list[dict]:
        """Payload the backend sees: system prompt + transcript, beta only."""
        persona = self.personas[ctx.persona_id]
        msgs = [{"role": "system", "content": persona.system_prompt}]
        for e in ctx.entries:
            if e["role"] == "tool":
                msgs.append({
                    "role": "tool", "name": e["name"],
                    "content": f"{e['name']}: {e['content']}",
                })
            else:
                msgs.append({"role": e["role"], "content": e["content"]})
        return msgs

    def step(self, ctx: ChatContext, user_text: str) -> tuple[str, list[dict]]:
        """One user turn: query the backend until it produces final text,
        executing and validating tool calls along the way."""
        persona = self.personas[ctx.persona_id]
        allowed = self.registry.list_tools(persona)
        tool_schemas = [s.wire_schema() for s in allowed]
        trace: list[dict] = []
        ctx.append_user(user_text)
        trace.append({"event": "user", "text": user_text})

        for call_no in range(self.max_tool_calls + 1):
            decision = self.backend.decide(self._backend_messages(ctx), tool_schemas)
            if decision.kind == "final_text":
                text = decision.text or ""
                ctx.append_assistant(text)
                trace.append({"event": "final_text", "text": text})
                return text, trace
            if call_no == self.max_tool_calls:
                break

            name = decision.name or ""
            call_id = f"{ctx.session_id}-{len(ctx.entries)}"
            if name not in {s.name for s in allowed}:
                msg = f"error: tool {name!r} is not available to this persona."
                ctx.append_tool(name or "unknown", msg, call_id)
                trace.append({"event": "tool_rejected", "tool": name, "reason": msg})
                continue
            spec = self.registry.get(name)
            try:
                args = spec.validate_args(decision.arguments or {})
            except ToolValidationError as exc:
                msg = f"validation error: {exc}. Please ask the user to clarify."
                ctx.append_tool(name, msg, call_id)
                trace.append({
                    "event": "validation_error", "tool": name,
                    "arguments": decision.arguments, "reason": str(exc),
                })
                continue

            started = time.monotonic()
            result = spec.handler(**args)
            elapsed = time.monotonic() - started
            event = {
                "event": "tool_executed", "tool": name, "arguments": args,
                "beta_name": spec.output_name, "beta": result.value,
                "message": result.message, "elapsed_s": round(elapsed, 6),
            }
            if elapsed > self.kernel_budget_s:
                event["over_budget"] = True
            if result.feasible is not None:
                token = verdict_token(name, args, result.value)
                ctx.verdicts.append(VerdictRecord(
                    tool=name, arguments=args, beta=result.value,
                    feasible=result.feasible, token=token,
                ))
                event["verdict_token"] = token
                event["feasible"] = result.feasible
            trace.append(event)
            ctx.append_tool(spec.output_name, result.message, call_id)

        text = "error: tool-call budget for this turn exhausted."
        ctx.append_assistant(text)
        trace.append({"event": "final_text", "text": text, "budget_exhausted": True})
        return text, trace

    def issue_gate(self, ctx: ChatContext, token: str) -> GateResult:
        """Grant issuance iff the session holds a verdict with this token
        and re-executing the stored call reproduces the same feasible beta."""
        record = next((v for v in ctx.verdicts if v.token == token), None)
        if record is None:
            return GateResult(False, None, "no verdict in this session matches the terms")
        if not record.feasible:
            return GateResult(False, None, "matching verdict is not feasible")
        spec = self.registry.get(record.tool)
        fresh = spec.handler(**record.arguments)
        if canonical_json(fresh.value) != canonical_json(record.beta):
            return GateResult(False, None, "re-executed verdict differs from the stored one")
        if not fresh.feasible:
            return GateResult(False, None, "re-executed verdict is not feasible")
        issuance = hashlib.sha256(f"issued:{token}".encode()).hexdigest()
        return GateResult(True, issuance, "ok")


@dataclass(frozen=True)
class NoiseSpec:
    """Seeded backend-failure injection emulating the known failure modes:
    dropped parameters, corrupted numbers, skipped tool calls with the
    feasibility asserted in prose instead."""
    drop_param: float = 0.0
    corrupt_number: float = 0.0
    skip_tool: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("drop_param", "corrupt_number", "skip_tool"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be a probability")


class ScriptedBackend:
    """Deterministic decision list, optionally perturbed by seeded noise."""

    def __init__(self, script: list[BackendDecision], noise: NoiseSpec | None = None):
        self._script = list(script)
        self._pos = 0
        self._noise = noise
        if noise is not None:
            import numpy as np

            self._rng = np.random.default_rng(noise.seed)

    def decide(self, messages: list[dict], tools: list[dict]) -> BackendDecision:
        if self._pos >= len(self._script):
            raise ScriptExhausted(f"script exhausted after {self._pos} decisions")
        decision = self._script[self._pos]
        self._pos += 1
        if self._noise is None or decision.kind != "tool_call":
            return decision
        rng = self._rng
        if rng.random() < self._noise.skip_tool:
            return BackendDecision.final_text(
                "I have checked your request and it is feasible; "
                "your contract is hereby confirmed."
            )
        args = dict(decision.arguments or {})
        if args and rng.random() < self._noise.drop_param:
            victim = sorted(args)[int(rng.integers(len(args)))]
            del args[victim]
        numeric = [k for k, v in args.items()
                   if isinstance(v, (int, float)) and not isinstance(v, bool)]
        if numeric and rng.random() < self._noise.corrupt_number:
            victim = numeric[int(rng.integers(len(numeric)))]
            args[victim] = args[victim] * 1000 + 7
        return BackendDecision.tool_call(decision.name or "", args)


class LiveBackend:
    """Chat-completions wire client with bounded retries."""

    def __init__(self, endpoint: str, api_key: str, model: str,
                 temperature: float = 0.0, timeout_s: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.temperature = temperature
        self.timeout_s = timeout_s

    def decide(self, messages: list[dict], tools: list[dict]) -> BackendDecision:
        import httpx

        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
            "tools": tools,
        }
        last_exc: Exception | None = None
        for attempt in range(RETRY_ATTEMPTS):
            try:
                resp = httpx.post(
                    f"{self.endpoint}/chat/completions",
                    json=payload,
                    headers={"Authorization": f"Bearer {self.api_key}"},
                    timeout=self.timeout_s,
                )
                resp.raise_for_status()
                return self._parse(resp.json())
            except httpx.HTTPError as exc:
                last_exc = exc
                time.sleep(RETRY_BACKOFF_S)
        raise ConnectionError(f"backend unreachable after {RETRY_ATTEMPTS} attempts: {last_exc}")

    @staticmethod
    def _parse(doc: dict) -> BackendDecision:
        msg = doc["choices"][0]["message"]
        calls = msg.get("tool_calls") or []
        if calls:
            fn = calls[0]["function"]
            raw = fn.get("arguments", "{}")
            args = json.loads(raw) if isinstance(raw, str) else raw
            return BackendDecision.tool_call(fn["name"], args)
        return BackendDecision.final_text(msg.get("content") or "")
