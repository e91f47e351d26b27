"""Default tool registry and personas binding the chat loop to kernels.

Three personas: a residential energy advisor (the four low-voltage
functions), a distribution system operator (MV connection planning) and
a transmission system operator (outage planning). Each persona sees only
its own tools.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import residential as res
from .acpf import ConnectionRequest, SecurityLimits, check_connection
from .model import MaintenanceCalendar, Network
from .orchestrator import ParamSpec, Persona, ToolRegistry, ToolResult, ToolSpec
from .scopf import OutageRequest, plan_outage

__all__ = ["DraftStore", "build_registry", "build_personas", "default_setup"]

DEFAULT_NEIGHBOURHOOD_CAP = 12.0


@dataclass
class DraftStore:
    """Drafts minted by DevelopContract, keyed by their verdict token, so
    the Contracting tool can re-check terms before confirming."""
    drafts: dict[str, res.ResidentialContract] = field(default_factory=dict)

    def put(self, contract: res.ResidentialContract):
        assert contract.verdict_token
        self.drafts[contract.verdict_token] = contract

    def get(self, token: str) -> res.ResidentialContract | None:
        return self.drafts.get(token)


def build_registry(
    feeder: Network,
    grid: Network,
    calendar: MaintenanceCalendar,
    contingencies: tuple[int, ...],
    neighbourhood: list[float],
    cap: float = DEFAULT_NEIGHBOURHOOD_CAP,
    limits: SecurityLimits | None = None,
    draft_store: DraftStore | None = None,
) -> tuple[ToolRegistry, DraftStore]:
    limits = limits or SecurityLimits()
    store = draft_store or DraftStore()
    registry = ToolRegistry()

    def electricity_consumption(**kw) -> ToolResult:
        usage = res.ApplianceUsage(
            washing_h=kw.get("washing_hours", 0.0),
            dishwasher_h=kw.get("dishwasher_hours", 0.0),
            tv_h=kw.get("tv_hours", 0.0),
            computer_h=kw.get("computer_hours", 0.0),
            lights_h=kw.get("lights_hours", 0.0),
            ev_hours=kw.get("ev_hours", 0.0),
            ev_start=int(kw.get("ev_start", 18)),
        )
        profile = res.estimate_consumption(usage)
        values = [round(v, 4) for v in profile.values]
        return ToolResult(
            value={"profile": values},
            message="hourly profile (kWh): " + ", ".join(f"{v:g}" for v in values),
        )

    def develop_contract(profile, ev_start=None, ev_hours=0.0) -> ToolResult:
        outcome = res.develop_contract(
            res.HourlyProfile(tuple(profile), "requested"),
            res.HourlyProfile(tuple(neighbourhood), "neighbourhood"),
            cap,
            ev_start=int(ev_start) if ev_start is not None else None,
            ev_hours=ev_hours,
        )
        if outcome.feasible:
            store.put(outcome.contract)
            value = {
                "feasible": True,
                "contract": outcome.contract.terms(),
                "verdict_token": outcome.verdict_token,
            }
            msg = (
                f"{outcome.message} draft contract: base "
                f"{outcome.contract.base_level} kWh, flexible "
                f"{outcome.contract.flexible_level} kWh during charging hours "
                f"{list(outcome.contract.charging_window)}; verdict token "
                f"{outcome.verdict_token}"
            )
        else:
            value = {
                "feasible": False,
                "alternative_starts": list(outcome.alternative_starts),
            }
            msg = (
                f"{outcome.message} alternative EV start hours: "
                f"{list(outcome.alternative_starts)}"
            )
        return ToolResult(value=value, message=msg, feasible=outcome.feasible)

    def alternative_slots(profile, ev_start, ev_hours) -> ToolResult:
        outcome = res.develop_contract(
            res.HourlyProfile(tuple(profile), "requested"),
            res.HourlyProfile(tuple(neighbourhood), "neighbourhood"),
            cap, ev_start=int(ev_start), ev_hours=ev_hours,
        )
        if outcome.feasible:
            starts = list(range(24))
        else:
            starts = list(outcome.alternative_starts)
        return ToolResult(
            value={"alternative_starts": starts},
            message=f"feasible EV start hours: {starts}",
        )

    def contracting(verdict_token: str) -> ToolResult:
        draft = store.get(verdict_token)
        if draft is None:
            return ToolResult(
                value={"confirmed": False, "reason": "unknown verdict token"},
                message="cannot confirm: no draft matches this verdict token.",
                feasible=False,
            )
        try:
            confirmed = res.finalise_contract(draft, verdict_token)
        except res.GateRefusal as exc:
            return ToolResult(
                value={"confirmed": False, "reason": str(exc)},
                message=f"cannot confirm: {exc}", feasible=False,
            )
        return ToolResult(
            value={"confirmed": True, "contract": confirmed.terms()},
            message=(
                f"contract confirmed: base {confirmed.base_level} kWh, flexible "
                f"{confirmed.flexible_level} kWh."
            ),
            feasible=True,
        )

    def mv_contract_planner(zip, profile, power_factor=0.95) -> ToolResult:
        verdict = check_connection(
            feeder,
            ConnectionRequest(bus=int(zip), profile_mw=tuple(profile),
                              power_factor=power_factor),
            limits,
        )
        return ToolResult(
            value={
                "feasible": verdict.feasible,
                "infeasible_steps": list(verdict.infeasible_steps),
                "message": verdict.message,
            },
            message=verdict.message,
            feasible=verdict.feasible,
        )

    def outage_planner(asset, start_day, duration_days) -> ToolResult:
        result = plan_outage(
            grid, calendar,
            OutageRequest(start_day=int(start_day),
                          duration_days=int(duration_days), asset=int(asset)),
            contingencies,
        )
        return ToolResult(
            value={
                "verdict": result.verdict,
                "alternative_start": result.alternative_start,
                "message": result.message,
            },
            message=result.message,
            feasible=result.verdict == "possible",
        )

    n_bus = feeder.n_bus
    horizon = grid.horizon
    gen_ids = [g.id for g in grid.generators]

    registry.register_tool(ToolSpec(
        name="ElectricityConsumption",
        instruction=(
            "Estimate a household's hourly electricity consumption profile for "
            "a typical day from daily appliance usage hours and EV charging."
        ),
        params=(
            ParamSpec("washing_hours", "number", required=False, minimum=0, maximum=24,
                      description="daily washing machine hours"),
            ParamSpec("dishwasher_hours", "number", required=False, minimum=0, maximum=24,
                      description="daily dishwasher hours"),
            ParamSpec("tv_hours", "number", required=False, minimum=0, maximum=24,
                      description="daily television hours"),
            ParamSpec("computer_hours", "number", required=False, minimum=0, maximum=24,
                      description="daily computer hours"),
            ParamSpec("lights_hours", "number", required=False, minimum=0, maximum=24,
                      description="daily lighting hours"),
            ParamSpec("ev_hours", "number", required=False, minimum=0, maximum=24,
                      description="daily EV charging hours"),
            ParamSpec("ev_start", "integer", required=False, minimum=0, maximum=23,
                      description="EV charging start hour"),
        ),
        output_name="hourly_profile",
        handler=electricity_consumption,
    ))
    registry.register_tool(ToolSpec(
        name="DevelopContract",
        instruction=(
            "Check a 24-hour household profile against the neighbourhood "
            "capacity and draft a contract; on infeasibility list alternative "
            "EV charging start hours."
        ),
        params=(
            ParamSpec("profile", "number_list", length=24, minimum=0,
                      description="24 hourly consumption values in kWh"),
            ParamSpec("ev_start", "integer", required=False, minimum=0, maximum=23,
                      description="EV charging start hour within the profile"),
            ParamSpec("ev_hours", "number", required=False, minimum=0, maximum=24,
                      description="EV charging duration in hours"),
        ),
        output_name="contract_verdict",
        handler=develop_contract,
    ))
    registry.register_tool(ToolSpec(
        name="AlternativeSlots",
        instruction=(
            "List the EV charging start hours for which the given household "
            "profile stays within the neighbourhood capacity."
        ),
        params=(
            ParamSpec("profile", "number_list", length=24, minimum=0,
                      description="24 hourly consumption values in kWh"),
            ParamSpec("ev_start", "integer", minimum=0, maximum=23,
                      description="current EV charging start hour"),
            ParamSpec("ev_hours", "number", minimum=0, maximum=24,
                      description="EV charging duration in hours"),
        ),
        output_name="alternative_slots",
        handler=alternative_slots,
    ))
    registry.register_tool(ToolSpec(
        name="Contracting",
        instruction=(
            "Confirm a previously drafted residential contract identified by "
            "its verdict token."
        ),
        params=(
            ParamSpec("verdict_token", "string",
                      description="verdict token returned with the draft"),
        ),
        output_name="contract_status",
        handler=contracting,
    ))
    registry.register_tool(ToolSpec(
        name="MVContractPlanner",
        instruction=(
            "Check whether connecting a new site with a 24-hour MW load "
            "profile at a given zip code is feasible on the MV network."
        ),
        params=(
            ParamSpec("zip", "integer", minimum=0, maximum=n_bus - 1,
                      description=f"location zip code, 0 to {n_bus - 1}"),
            ParamSpec("profile", "number_list", length=24, minimum=0, maximum=4,
                      description="24 hourly load values in MW, 0 to 4"),
            ParamSpec("power_factor", "number", required=False, minimum=0.5, maximum=1.0,
                      description="load power factor, default 0.95"),
        ),
        output_name="feasibility_verdict",
        handler=mv_contract_planner,
    ))
    registry.register_tool(ToolSpec(
        name="OutagePlanner",
        instruction=(
            "Check whether taking a generator out of service for maintenance "
            "over a day window keeps the grid N-1 secure; on infeasibility "
            "search earlier start days."
        ),
        params=(
            ParamSpec("asset", "integer", minimum=min(gen_ids), maximum=max(gen_ids),
                      description="generator id to take out of service"),
            ParamSpec("start_day", "integer", minimum=0, maximum=horizon - 1,
                      description="requested start day"),
            ParamSpec("duration_days", "integer", minimum=1, maximum=horizon,
                      description="outage duration in days"),
        ),
        output_name="outage_verdict",
        handler=outage_planner,
    ))
    return registry, store


def build_personas(feeder: Network) -> dict[str, Persona]:
    n = feeder.n_bus
    return {
        "residential": Persona(
            id="residential",
            system_prompt=(
                "You are an energy advisor helping a household design a "
                "customised electricity contract. Gather the daily appliance "
                "usage and EV charging habits, estimate the hourly consumption, "
                "check it against the neighbourhood capacity, propose "
                "alternative charging times when needed, and only confirm a "
                "contract through the Contracting tool."
            ),
            allowed_tools=("ElectricityConsumption", "DevelopContract",
                           "AlternativeSlots", "Contracting"),
        ),
        "dso": Persona(
            id="dso",
            system_prompt=(
                "You are a distribution system operator helping an enterprise "
                "plan an electricity contract for a new site. Ask for the zip "
                f"code, a value between 0 and {n - 1} which are only valid "
                "entries, then for the expected hourly load profile in MW "
                "(24 values, each between 0 and 4), and check feasibility with "
                "the MVContractPlanner tool before agreeing to anything."
            ),
            allowed_tools=("MVContractPlanner",),
        ),
        "tso": Persona(
            id="tso",
            system_prompt=(
                "You are a transmission system operator scheduling generator "
                "maintenance. Ask which generator, the requested start day and "
                "the duration in days, and verify every request with the "
                "OutagePlanner tool; never promise a window the tool has not "
                "confirmed."
            ),
            allowed_tools=("OutagePlanner",),
        ),
    }


def default_setup() -> tuple[ToolRegistry, dict[str, Persona], DraftStore]:
    """Registry and personas bound to the bundled fixtures."""
    from .fixtures import GRID9G_CONTINGENCIES, duck_curve, feeder12, grid9g, grid9g_calendar

    feeder = feeder12()
    grid = grid9g()
    registry, store = build_registry(
        feeder, grid, grid9g_calendar(), GRID9G_CONTINGENCIES, duck_curve(),
    )
    return registry, build_personas(feeder), store
