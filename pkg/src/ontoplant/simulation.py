"""Deterministic discrete-event simulation of a small flow-shop plant.

Layout (fixed by this module): parts enter buffer B1, robot R1 moves them
to buffer B2, robot R2 delivers them to one of the machines, and R2 later
moves finished parts to buffer B3 where they exit. The knowledge base must
therefore declare resources named R1, R2, B1, B2, B3 plus at least one
machine with a capable plan.

Agents never look at simulator internals; every decision is made from
knowledge-base reads and every state change is written back through the
runtime facade:

- the product agent registers an execution on arrival (best completion
  estimate), re-selects the machine when its part reaches B2, and updates
  status/real times as the part moves;
- the resource agents evaluate machine uptime at fixed policy ticks and
  trade energy for speed: each minute shaved multiplies the energy cost
  by (1 + rate), each minute added multiplies it by (1 - rate),
  compounding, subject to a fleet-wide energy budget.

Identical inputs produce byte-identical traces: the event queue orders by
(time, kind priority, payload id) and all arithmetic is integer or
Decimal where it matters.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Mapping

from . import schema as sc
from .errors import (
    BudgetInfeasibleError, ConfigError, NoCapableResourceError,
)
from .runtime import (
    KnowledgeBase, OeeReport, Performance, PLANNED, RUNNING, SUCCESSFUL,
    iso_to_sim_minutes,
)
from .schema import ex
from .terms import Iri, Literal, canonical_decimal

OBJECTIVE_METRICS = ("completionTime", "energyKwh", "emissions", "quality")

_EVENT_PRIORITY = {"processDone": 0, "transferDone": 1, "arrival": 2, "policyTick": 3}


@dataclass(frozen=True)
class RaPolicyConfig:
    """Resource-agent policy knobs.

    Defaults: keep each machine's uptime above 50 % while the fleet's
    total expected energy cost stays within 450 kWh, trading 5 % of the
    current energy cost per minute of duration.
    """

    uptime_threshold: float = 0.50
    energy_budget_kwh: Decimal = Decimal(450)
    trade_rate_per_minute: Decimal = Decimal("0.05")
    evaluation_window_min: int = 500
    speed_up_steps_cap: int = 5

    def __post_init__(self):
        if not 0 < self.uptime_threshold < 1:
            raise ConfigError("uptime_threshold must be in (0, 1)")
        if self.trade_rate_per_minute <= 0:
            raise ConfigError("trade_rate_per_minute must be > 0")
        if self.evaluation_window_min <= 0:
            raise ConfigError("evaluation_window_min must be > 0")
        if self.speed_up_steps_cap < 0:
            raise ConfigError("speed_up_steps_cap must be >= 0")


@dataclass(frozen=True)
class ObjectiveFunction:
    """Linear objective: score(candidate) = sum of value * metric."""

    coefficients: tuple[tuple[str, Decimal], ...]

    def __post_init__(self):
        if not self.coefficients:
            raise ConfigError("objective function needs at least one coefficient")
        for metric, _ in self.coefficients:
            if metric not in OBJECTIVE_METRICS:
                raise ConfigError(f"unknown objective metric {metric!r}")

    def score(self, metrics: Mapping[str, float]) -> float:
        return sum(float(value) * metrics[metric] for metric, value in self.coefficients)


DEFAULT_OBJECTIVE = ObjectiveFunction((("completionTime", Decimal(1)),))


@dataclass(frozen=True)
class MachineMetrics:
    uptime: float
    perf_efficiency: float


@dataclass(frozen=True)
class Adjustment:
    """Outcome of one policy decision for one machine."""

    machine: str
    duration_delta: int
    energy_factor: Decimal
    performances: tuple[tuple[str, Performance], ...]  # (plan pair, new expected)


@dataclass(frozen=True)
class MachineChoice:
    machine: str
    plan: str
    completion: float


@dataclass(frozen=True)
class TraceEvent:
    time: int
    kind: str
    entity: str
    detail: str


@dataclass
class SimTrace:
    events: list[TraceEvent] = field(default_factory=list)
    oee_reports: list[OeeReport] = field(default_factory=list)
    adjustments: list[tuple[int, Adjustment]] = field(default_factory=list)
    final_performance: dict[str, Performance] = field(default_factory=dict)
    parts_entered: int = 0
    parts_exited: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    arrivals: tuple[int, ...]
    horizon: int
    transfer_minutes: int = 1
    policy: RaPolicyConfig = field(default_factory=RaPolicyConfig)

    def __post_init__(self):
        if self.horizon <= 0:
            raise ConfigError("horizon must be > 0")
        if self.transfer_minutes < 0:
            raise ConfigError("transfer_minutes must be >= 0")
        if list(self.arrivals) != sorted(self.arrivals):
            raise ConfigError("arrival times must be sorted")
        if any(t < 0 for t in self.arrivals):
            raise ConfigError("arrival times must be >= 0")


def scenario_from_toml(text: str) -> ScenarioConfig:
    """Parse a scenario config; see the shipped fixtures for the layout."""
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
        import tomli as tomllib
    try:
        data = tomllib.loads(text)
    except Exception as exc:
        raise ConfigError(f"bad scenario TOML: {exc}")

    scenario = data.get("scenario", {})
    arrivals_cfg = data.get("arrivals", {})
    policy_cfg = data.get("policy", {})

    if "times" in arrivals_cfg:
        arrivals = tuple(int(t) for t in arrivals_cfg["times"])
    elif "count" in arrivals_cfg:
        rng = random.Random(int(arrivals_cfg.get("seed", 0)))
        mean_gap = float(arrivals_cfg.get("mean_gap", 10))
        if mean_gap <= 0:
            raise ConfigError("arrivals.mean_gap must be > 0")
        times = []
        t = 0
        for _ in range(int(arrivals_cfg["count"])):
            times.append(t)
            t += max(1, round(rng.expovariate(1.0 / mean_gap)))
        arrivals = tuple(times)
    else:
        raise ConfigError("scenario needs arrivals.times or arrivals.count")

    policy_kwargs = {}
    for key in ("uptime_threshold", "evaluation_window_min", "speed_up_steps_cap"):
        if key in policy_cfg:
            policy_kwargs[key] = policy_cfg[key]
    if "energy_budget_kwh" in policy_cfg:
        policy_kwargs["energy_budget_kwh"] = Decimal(str(policy_cfg["energy_budget_kwh"]))
    if "trade_rate_per_minute" in policy_cfg:
        policy_kwargs["trade_rate_per_minute"] = Decimal(str(policy_cfg["trade_rate_per_minute"]))

    return ScenarioConfig(
        arrivals=arrivals,
        horizon=int(scenario.get("horizon", 1000)),
        transfer_minutes=int(scenario.get("transfer_minutes", 1)),
        policy=RaPolicyConfig(**policy_kwargs),
    )


# ---------------------------------------------------------------------------
# Product-agent decisions (knowledge-base reads only)


def _objective_for(kb: KnowledgeBase, product_id: str) -> ObjectiveFunction:
    objectives = kb.graph.match(ex(product_id), sc.HAS_OBJECTIVE_FUNCTION, None)
    if not objectives:
        return DEFAULT_OBJECTIVE
    coefficients = []
    node = objectives[0].object
    for t in kb.graph.match(node, sc.HAS_COEFFICIENT, None):
        coef = t.object
        metric = None
        value = None
        for inner in kb.graph.match(coef, None, None):
            if inner.predicate == sc.COEFFICIENT_FOR and isinstance(inner.object, Literal):
                metric = inner.object.text
            if inner.predicate == sc.HAS_VALUE and isinstance(inner.object, Literal):
                value = inner.object.numeric_value()
        if metric is not None and value is not None:
            coefficients.append((metric, value))
    if not coefficients:
        return DEFAULT_OBJECTIVE
    return ObjectiveFunction(tuple(sorted(coefficients)))


def _free_at(kb: KnowledgeBase, resource_id: str, exclude_execution: str | None) -> float:
    """Earliest minute the resource is expected free, judged from planned
    and running executions recorded in the knowledge base."""
    free = 0.0
    for t in kb.graph.match(None, sc.RUNS_ON_RESOURCE, ex(resource_id)):
        exec_id = t.subject.local
        if exec_id == exclude_execution:
            continue
        record = kb.read_execution(exec_id)
        if record.status not in (PLANNED, RUNNING):
            continue
        free = max(free, iso_to_sim_minutes(record.planned_end))
    return free


def pa_select_machine(kb: KnowledgeBase, product_id: str, now: int | float,
                      exclude_execution: str | None = None) -> MachineChoice:
    """Pick the resource/plan pairing minimising the product's objective.

    With the default objective (completionTime weight 1) this is the
    earliest completion: max(now, resource free time) + expected duration.
    Ties break on machine id, then plan id.
    """
    features = [t.object for t in kb.graph.match(ex(product_id), sc.DEFINES, None)
                if isinstance(t.object, Iri)]
    objective = _objective_for(kb, product_id)
    candidates: list[tuple[float, str, str]] = []
    for feature in features:
        for plan_triple in kb.graph.match(None, sc.REALIZES, feature):
            pair = plan_triple.subject
            for capable in kb.graph.match(None, sc.CAPABLE_OF, pair):
                resource = capable.subject.local
                perf = kb.expected_performance(resource, pair.local)
                completion = (max(float(now), _free_at(kb, resource, exclude_execution))
                              + float(perf.duration_min))
                score = objective.score({
                    "completionTime": completion,
                    "energyKwh": float(perf.energy_kwh),
                    "emissions": float(perf.emissions),
                    "quality": float(perf.quality),
                })
                candidates.append((score, resource, pair.local, completion))
    if not candidates:
        raise NoCapableResourceError(product_id)
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    score, machine, plan, completion = candidates[0]
    return MachineChoice(machine=machine, plan=plan, completion=completion)


# ---------------------------------------------------------------------------
# Resource-agent policy


def _projected_uptime(uptime: float, durations: Mapping[str, Decimal],
                      machine: str, steps: int) -> float:
    """Uptime forecast after shaving ``steps`` minutes off one machine.

    A machine's share of demand is modelled as proportional to its share
    of fleet processing speed (1/duration): making a machine relatively
    faster attracts proportionally more work.
    """
    speeds = {m: 1.0 / float(d) for m, d in durations.items()}
    total = sum(speeds.values())
    share_before = speeds[machine] / total
    new_speed = 1.0 / (float(durations[machine]) - steps)
    share_after = new_speed / (total - speeds[machine] + new_speed)
    return uptime * share_after / share_before


def plan_adjustments(metrics: Mapping[str, MachineMetrics],
                     performances: Mapping[str, Mapping[str, Performance]],
                     policy: RaPolicyConfig) -> list[Adjustment]:
    """Pure policy arithmetic: decide per-machine duration/energy changes.

    Machines below the uptime threshold are sped up (ascending uptime,
    best efficiency first on ties): one minute per step, energy times
    (1 + rate) per step, until the projected uptime clears the threshold,
    the step cap is hit, or the duration floor of one minute is reached.
    If the fleet's total expected energy then exceeds the budget, the
    highest-uptime machine not just sped up is slowed one minute at a
    time (energy times (1 - rate)) until the fleet fits the budget.
    """
    up_rate = Decimal(1) + policy.trade_rate_per_minute
    down_rate = Decimal(1) - policy.trade_rate_per_minute

    durations: dict[str, Decimal] = {}
    energies: dict[str, Decimal] = {}
    for machine, pairs in performances.items():
        if not pairs:
            continue
        durations[machine] = min(p.duration_min for p in pairs.values())
        energies[machine] = sum((p.energy_kwh for p in pairs.values()), Decimal(0))

    speed_steps: dict[str, int] = {}
    below = sorted(
        (m for m in durations if metrics[m].uptime < policy.uptime_threshold),
        key=lambda m: (metrics[m].uptime, -metrics[m].perf_efficiency, m))
    for machine in below:
        steps = 0
        while (steps < policy.speed_up_steps_cap
               and durations[machine] - steps > 1
               and _projected_uptime(metrics[machine].uptime, durations,
                                     machine, steps) <= policy.uptime_threshold):
            steps += 1
        if steps:
            speed_steps[machine] = steps
            durations[machine] -= steps
            energies[machine] *= up_rate ** steps

    slow_steps: dict[str, int] = {}
    fleet = sum(energies.values(), Decimal(0))
    if fleet > policy.energy_budget_kwh:
        slow_candidates = sorted(
            (m for m in durations if m not in speed_steps),
            key=lambda m: (-metrics[m].uptime, metrics[m].perf_efficiency, m))
        if not slow_candidates:
            raise BudgetInfeasibleError(
                f"fleet energy {fleet} kWh exceeds budget with no machine left to slow")
        target = slow_candidates[0]
        steps = 0
        while fleet > policy.energy_budget_kwh:
            if energies[target] < Decimal("0.001") or steps > 10_000:
                raise BudgetInfeasibleError(
                    f"cannot reach {policy.energy_budget_kwh} kWh by slowing {target}")
            fleet -= energies[target]
            energies[target] *= down_rate
            durations[target] += 1
            fleet += energies[target]
            steps += 1
        slow_steps[target] = steps

    adjustments: list[Adjustment] = []
    for machine in sorted(set(speed_steps) | set(slow_steps)):
        if machine in speed_steps:
            delta = -speed_steps[machine]
            factor = up_rate ** speed_steps[machine]
        else:
            delta = slow_steps[machine]
            factor = down_rate ** slow_steps[machine]
        new_pairs = []
        for pair, perf in sorted(performances[machine].items()):
            new_pairs.append((pair, Performance(
                duration_min=perf.duration_min + delta,
                energy_kwh=perf.energy_kwh * factor,
                emissions=perf.emissions,
                quality=perf.quality,
            )))
        adjustments.append(Adjustment(machine=machine, duration_delta=delta,
                                      energy_factor=factor,
                                      performances=tuple(new_pairs)))
    return adjustments


def machine_performances(kb: KnowledgeBase) -> dict[str, dict[str, Performance]]:
    """Expected performance of every machine's capable plan pairings."""
    out: dict[str, dict[str, Performance]] = {}
    for t in kb.graph.match(None, sc.RDF_TYPE, sc.MACHINE):
        machine = t.subject.local
        pairs: dict[str, Performance] = {}
        for capable in kb.graph.match(t.subject, sc.CAPABLE_OF, None):
            if isinstance(capable.object, Iri):
                pair = capable.object.local
                pairs[pair] = kb.expected_performance(machine, pair)
        if pairs:
            out[machine] = pairs
    return out


def ra_evaluate_and_adjust(kb: KnowledgeBase, policy: RaPolicyConfig,
                           window: tuple[int | float, int | float],
                           metrics: Mapping[str, MachineMetrics] | None = None,
                           ) -> list[Adjustment]:
    """Evaluate machine uptimes over ``window`` and commit adjustments.

    ``metrics`` overrides the knowledge-base evaluation (used for what-if
    analysis and tests); otherwise uptime and performance efficiency come
    from :meth:`KnowledgeBase.compute_oee`. Without any completed
    execution in the window there is nothing to learn, so no adjustment
    is made. Committed changes go through change_resource_performance,
    one plan pairing at a time.
    """
    performances = machine_performances(kb)
    if metrics is None:
        metrics = {}
        any_complete = False
        for machine in performances:
            report = kb.compute_oee(machine, window)
            metrics[machine] = MachineMetrics(uptime=report.uptime,
                                              perf_efficiency=report.perf_efficiency)
            for row in kb.get_resource_history(machine):
                finished = iso_to_sim_minutes(row.real_end)
                if window[0] < finished <= window[1]:
                    any_complete = True
                    break
        if not any_complete:
            return []
    adjustments = plan_adjustments(metrics, performances, policy)
    for adj in adjustments:
        for pair, perf in adj.performances:
            kb.change_resource_performance(adj.machine, pair, perf)
    return adjustments


def oee_report_series(kb: KnowledgeBase, machines: list[str], horizon: int,
                      window_min: int) -> list[OeeReport]:
    """Per-window, per-machine OEE reports covering [0, horizon].

    Windows are consecutive spans of ``window_min`` minutes; a final
    partial window covers any remainder. Reports are computed purely from
    knowledge-base records, so recomputing them from a Turtle dump of the
    same knowledge base gives identical values.
    """
    reports: list[OeeReport] = []
    start = 0
    while start < horizon:
        end = min(start + window_min, horizon)
        for machine in sorted(machines):
            reports.append(kb.compute_oee(machine, (start, end)))
        start = end
    return reports


# ---------------------------------------------------------------------------
# The event loop


class _PartState:
    __slots__ = ("product", "execution", "machine", "plan")

    def __init__(self, product: str, execution: str, machine: str, plan: str):
        self.product = product
        self.execution = execution
        self.machine = machine
        self.plan = plan


class _Sim:
    def __init__(self, kb: KnowledgeBase, config: ScenarioConfig):
        self.kb = kb
        self.config = config
        self.trace = SimTrace()
        self.now = 0
        self._queue: list[tuple[int, int, str, int, str, str]] = []
        self._seq = 0

        resources = {t.subject.local for t in kb.graph.match(None, sc.RDF_TYPE, sc.RESOURCE)}
        for required in ("R1", "R2", "B1", "B2", "B3"):
            if required not in resources:
                raise ConfigError(f"knowledge base lacks required resource {required!r}")
        self.machines = sorted(machine_performances(kb))
        if not self.machines:
            raise ConfigError("knowledge base declares no machine with a capable plan")
        for machine, pairs in machine_performances(kb).items():
            for pair, perf in pairs.items():
                if perf.duration_min != int(perf.duration_min):
                    raise ConfigError(
                        f"{machine}/{pair}: simulation needs whole-minute durations")

        products = sorted(t.subject.local
                          for t in kb.graph.match(None, sc.RDF_TYPE, sc.PRODUCT))
        if len(config.arrivals) > len(products):
            raise ConfigError(
                f"{len(config.arrivals)} arrivals but only {len(products)} products declared")
        self.part_of_arrival = {i: products[i] for i in range(len(config.arrivals))}

        # Physical plant state.
        self.b1: list[str] = []
        self.b2: list[str] = []
        self.b3: list[str] = []
        self.r1_busy_until: int | None = None
        self.r2_busy_until: int | None = None
        # machine -> ("reserved"|"processing"|"done", part, minute)
        self.machine_state: dict[str, tuple[str, str, int]] = {}
        self.parts: dict[str, _PartState] = {}
        self.in_transit = 0

    # -- event queue ---------------------------------------------------------

    def schedule(self, time: int, kind: str, entity: str, detail: str = ""):
        if time > self.config.horizon:
            return
        self._seq += 1
        heapq.heappush(self._queue,
                       (time, _EVENT_PRIORITY[kind], entity, self._seq, kind, detail))

    def record(self, kind: str, entity: str, detail: str):
        self.trace.events.append(TraceEvent(self.now, kind, entity, detail))

    # -- knowledge-base interactions ------------------------------------------

    def _register_arrival(self, part: str):
        choice = pa_select_machine(self.kb, part, self.now + 2 * self.config.transfer_minutes)
        start = max(self.now + 2 * self.config.transfer_minutes,
                    _free_at(self.kb, choice.machine, None))
        duration = int(self.kb.expected_performance(choice.machine, choice.plan).duration_min)
        execution = self.kb.add_planned_execution_data(
            part, choice.plan, planned_start=start, planned_end=start + duration,
            resource=choice.machine)
        self.parts[part] = _PartState(part, execution, choice.machine, choice.plan)

    def _reselect_at_b2(self, part: str):
        state = self.parts[part]
        eta = self.now + self.config.transfer_minutes
        choice = pa_select_machine(self.kb, part, eta, exclude_execution=state.execution)
        start = max(eta, _free_at(self.kb, choice.machine, state.execution))
        duration = int(self.kb.expected_performance(choice.machine, choice.plan).duration_min)
        self.kb.update_execution_data(
            state.execution, resource=choice.machine, plan=choice.plan,
            planned_start=start, planned_end=start + duration)
        state.machine = choice.machine
        state.plan = choice.plan

    # -- dispatching -----------------------------------------------------------

    def dispatch(self):
        hop = self.config.transfer_minutes
        # R1: move the head of B1 to B2.
        if self.b1 and (self.r1_busy_until is None):
            part = self.b1.pop(0)
            self.r1_busy_until = self.now + hop
            self.in_transit += 1
            self.schedule(self.now + hop, "transferDone", "R1", part)
        # R2: pickups (they free machines) take precedence over deliveries.
        if self.r2_busy_until is None:
            done = sorted(
                ((since, m, part) for m, (phase, part, since) in self.machine_state.items()
                 if phase == "done"),
                key=lambda item: (item[0], item[1]))
            if done:
                _, machine, part = done[0]
                del self.machine_state[machine]
                self.in_transit += 1
                self.r2_busy_until = self.now + hop
                self.schedule(self.now + hop, "transferDone", "R2", f"pickup:{machine}:{part}")
                return
            for part in self.b2:
                machine = self.parts[part].machine
                if machine not in self.machine_state:
                    self.b2.remove(part)
                    self.machine_state[machine] = ("reserved", part, self.now)
                    self.r2_busy_until = self.now + hop
                    self.in_transit += 1
                    self.schedule(self.now + hop, "transferDone", "R2",
                                  f"deliver:{machine}:{part}")
                    break

    # -- event handlers ----------------------------------------------------------

    def on_arrival(self, part: str):
        self.b1.append(part)
        self.trace.parts_entered += 1
        self._register_arrival(part)
        self.record("arrival", part, "enters B1")

    def on_transfer_done(self, robot: str, detail: str):
        if robot == "R1":
            part = detail
            self.r1_busy_until = None
            self.in_transit -= 1
            self.b2.append(part)
            self._reselect_at_b2(part)
            self.record("transferDone", "R1",
                        f"{part} to B2 (machine {self.parts[part].machine})")
            return
        action, machine, part = detail.split(":")
        self.r2_busy_until = None
        self.in_transit -= 1
        if action == "deliver":
            state = self.parts[part]
            duration = int(self.kb.expected_performance(state.machine, state.plan).duration_min)
            self.machine_state[machine] = ("processing", part, self.now + duration)
            self.kb.update_execution_data(state.execution, status=RUNNING,
                                          real_start=self.now)
            self.schedule(self.now + duration, "processDone", machine, part)
            self.record("transferDone", "R2", f"{part} to {machine}")
        else:  # pickup
            self.b3.append(part)
            self.trace.parts_exited += 1
            self.record("transferDone", "R2", f"{part} to B3 (exit)")

    def on_process_done(self, machine: str, part: str):
        state = self.parts[part]
        record = self.kb.read_execution(state.execution)
        started = int(iso_to_sim_minutes(record.real_start))
        expected = self.kb.expected_performance(state.machine, state.plan)
        self.kb.update_execution_data(
            state.execution, status=SUCCESSFUL, real_end=self.now,
            real_performance=Performance(
                duration_min=Decimal(self.now - started),
                energy_kwh=expected.energy_kwh,
                emissions=expected.emissions,
                quality=expected.quality,
            ))
        self.machine_state[machine] = ("done", part, self.now)
        self.record("processDone", machine, part)

    def on_policy_tick(self, tick: int):
        window = (tick - self.config.policy.evaluation_window_min, tick)
        adjustments = ra_evaluate_and_adjust(self.kb, self.config.policy, window)
        for adj in adjustments:
            self.trace.adjustments.append((self.now, adj))
        summary = ";".join(
            f"{a.machine}:{a.duration_delta:+d}min,x{canonical_decimal(a.energy_factor)}"
            for a in adjustments) or "none"
        fleet = sum((p.energy_kwh for pairs in machine_performances(self.kb).values()
                     for p in pairs.values()), Decimal(0))
        self.record("policyTick", "fleet",
                    f"window={window[0]}..{window[1]} adjustments={summary} "
                    f"fleetEnergy={canonical_decimal(fleet)}")

    # -- main loop ------------------------------------------------------------------

    def run(self) -> SimTrace:
        for index, time in enumerate(self.config.arrivals):
            self.schedule(time, "arrival", self.part_of_arrival[index], str(index))
        window = self.config.policy.evaluation_window_min
        tick = window
        while tick <= self.config.horizon:
            self.schedule(tick, "policyTick", f"tick-{tick:08d}", str(tick))
            tick += window

        while self._queue:
            time, _, entity, _, kind, detail = heapq.heappop(self._queue)
            self.now = time
            if kind == "arrival":
                self.on_arrival(entity)
            elif kind == "transferDone":
                self.on_transfer_done(entity, detail)
            elif kind == "processDone":
                self.on_process_done(entity, detail)
            else:
                self.on_policy_tick(int(detail))
            self.dispatch()
            self._check_conservation()

        self.trace.oee_reports = oee_report_series(
            self.kb, self.machines, self.config.horizon,
            self.config.policy.evaluation_window_min)
        for machine, pairs in machine_performances(self.kb).items():
            for pair, perf in sorted(pairs.items()):
                self.trace.final_performance[f"{machine}/{pair}"] = perf
        return self.trace

    def _check_conservation(self):
        # Parts held by machines; 'reserved' parts are still in a robot hand
        # and counted by in_transit.
        in_machines = sum(1 for phase, _, _ in self.machine_state.values()
                          if phase in ("processing", "done"))
        accounted = (len(self.b1) + len(self.b2) + len(self.b3)
                     + self.in_transit + in_machines)
        assert accounted == self.trace.parts_entered, (
            f"part conservation broken at t={self.now}: "
            f"{accounted} accounted vs {self.trace.parts_entered} entered")


def run_scenario(kb: KnowledgeBase, config: ScenarioConfig,
                 bundle: Mapping[str, str] | None = None) -> SimTrace:
    """Simulate the plant until the horizon; returns the event trace.

    When ``bundle`` is given, the CSV bundle is ingested first so a bare
    schema-only knowledge base can be used. Every knowledge-base mutation
    during the run goes through the runtime facade.
    """
    if bundle is not None:
        kb.build_bundle(bundle)
    return _Sim(kb, config).run()


# ---------------------------------------------------------------------------
# Text renderings used by the command-line interface


def render_trace(trace: SimTrace) -> str:
    """Tab-separated line-per-event rendering of a simulation trace."""
    lines = ["time\tevent\tentity\tdetail"]
    for e in trace.events:
        lines.append(f"{e.time}\t{e.kind}\t{e.entity}\t{e.detail}")
    lines.append(f"#\tsummary\tparts\tentered={trace.parts_entered} "
                 f"exited={trace.parts_exited}")
    return "\n".join(lines) + "\n"


def render_oee_csv(reports: list[OeeReport]) -> str:
    """CSV rendering of an OEE report series."""
    lines = ["windowStart,windowEnd,resource,uptime,perfEfficiency,qualityRate,oee"]
    for r in reports:
        lines.append(
            f"{r.window_start},{r.window_end},{r.resource},"
            f"{r.uptime:.6f},{r.perf_efficiency:.6f},{r.quality_rate:.6f},{r.oee:.6f}")
    return "\n".join(lines) + "\n"
