"""Behavior-tree policy execution against derived environment state.

The simulator is symbolic: world state is the environment's metadata table
plus an agent with a location and one pair of hands. Policies are behavior
trees (sequence, selector, condition, action); the action vocabulary is
data-driven, loaded from an action model file that declares parameters,
causal preconditions, and effects for every verb.

Verdicts separate failure modes the way a test harness needs them:

- pass: the tree returned success and every goal of the environment's
  logical trajectory holds afterwards.
- causal_violation: the policy executed an action whose preconditions were
  false (placing an object it never picked up, for instance). Conditions
  failing is normal control flow; actions forcing the world is not.
- goal_unreached: execution finished without cheating, but the tree failed
  or the goals do not hold.
- executor_error: the node budget ran out or the policy referenced unknown
  predicates, verbs, or the wrong arity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .environment import EnvironmentSpec
from .errors import SchemaMismatch, SchemaViolation
from .schema import Condition, TaskSchema, goals_for_trajectory
from .trajectories import LogicalTrajectory
from .validator import PhysicsReport

VERDICT_PASS = "pass"
VERDICT_CAUSAL = "causal_violation"
VERDICT_GOAL = "goal_unreached"
VERDICT_ERROR = "executor_error"

DEFAULT_BUDGET = 1000

AGENT = "agent"


# ---------------------------------------------------------------------------
# policy documents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BtCondition:
    predicate: str


@dataclass(frozen=True)
class BtAction:
    text: str


@dataclass(frozen=True)
class BtSequence:
    children: tuple


@dataclass(frozen=True)
class BtSelector:
    children: tuple


@dataclass(frozen=True)
class PolicySpec:
    label: str
    root: object


def _parse_node(doc, where: str):
    if not isinstance(doc, dict) or len(doc) != 1:
        raise SchemaViolation(f"{where}: node must be an object with one key")
    key, value = next(iter(doc.items()))
    if key == "condition":
        if not isinstance(value, str) or not value:
            raise SchemaViolation(f"{where}: condition needs a predicate name")
        return BtCondition(predicate=value)
    if key == "action":
        if not isinstance(value, str) or not value.strip():
            raise SchemaViolation(f"{where}: action needs a command string")
        return BtAction(text=value.strip())
    if key in ("sequence", "selector"):
        if not isinstance(value, list) or not value:
            raise SchemaViolation(f"{where}: {key} needs a non-empty child list")
        children = tuple(
            _parse_node(child, f"{where}/{key}[{i}]") for i, child in enumerate(value)
        )
        return BtSequence(children) if key == "sequence" else BtSelector(children)
    raise SchemaViolation(f"{where}: unknown node type {key!r}")


def parse_policy(doc: dict) -> PolicySpec:
    if not isinstance(doc, dict) or "root" not in doc:
        raise SchemaViolation("policy must be an object with a 'root' node")
    return PolicySpec(label=str(doc.get("label", "")), root=_parse_node(doc["root"], "root"))


def load_policy(path: str) -> PolicySpec:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"policy is not valid JSON: {exc}") from exc
    return parse_policy(doc)


# ---------------------------------------------------------------------------
# action model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionDef:
    name: str
    params: tuple
    preconditions: tuple  # of dicts
    effects: tuple  # of dicts


@dataclass
class ActionModel:
    actions: dict = field(default_factory=dict)

    def get(self, name: str) -> ActionDef | None:
        return self.actions.get(name)


def parse_action_model(doc: dict) -> ActionModel:
    if not isinstance(doc, dict) or "actions" not in doc:
        raise SchemaViolation("action model must be an object with 'actions'")
    model = ActionModel()
    for name, raw in doc["actions"].items():
        if not isinstance(raw, dict) or "params" not in raw:
            raise SchemaViolation(f"action {name!r} must declare its params")
        params = tuple(raw["params"])
        for effect in raw.get("effects", ()):
            for key in ("entity", "attribute", "value"):
                if key not in effect:
                    raise SchemaViolation(f"action {name!r} effect is missing {key!r}")
        for pre in raw.get("preconditions", ()):
            if "kind" not in pre:
                raise SchemaViolation(f"action {name!r} precondition is missing 'kind'")
        model.actions[name] = ActionDef(
            name=name,
            params=params,
            preconditions=tuple(raw.get("preconditions", ())),
            effects=tuple(raw.get("effects", ())),
        )
    return model


def load_action_model(path: str) -> ActionModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"action model is not valid JSON: {exc}") from exc
    return parse_action_model(doc)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


@dataclass
class SimOutcome:
    verdict: str
    ticks: int
    trace: list[str] = field(default_factory=list)
    detail: str = ""


class _Halt(Exception):
    def __init__(self, verdict: str, detail: str):
        self.verdict = verdict
        self.detail = detail
        super().__init__(detail)


def initial_world(env: EnvironmentSpec, schema: TaskSchema) -> dict:
    """World state from environment metadata plus the agent.

    Raises SchemaMismatch when an entity the schema needs attributes for is
    present without them; the simulation could not answer its queries.
    """
    world = dict(env.metadata)
    world[(AGENT, "location")] = schema.agent_start
    world[(AGENT, "holding")] = "nothing"
    for entity, attrs in schema.required_attributes.items():
        if world.get((entity, "presence")) != "present":
            continue
        for attr in attrs:
            if (entity, attr) not in world:
                raise SchemaMismatch(
                    f"entity {entity!r} is present but metadata lacks {attr!r}"
                )
    return world


def _resolve(token: str, args: dict) -> str:
    if isinstance(token, str) and token.startswith("$"):
        name = token[1:]
        if name not in args:
            raise _Halt(VERDICT_ERROR, f"action argument ${name} is not bound")
        return args[name]
    return token


def _precondition_holds(pre: dict, world: dict, args: dict) -> bool:
    kind = pre["kind"]
    if kind == "holding_nothing":
        return world.get((AGENT, "holding")) == "nothing"
    if kind == "holding":
        return world.get((AGENT, "holding")) == _resolve(pre["entity"], args)
    if kind == "agent_at":
        return world.get((AGENT, "location")) == _resolve(pre["entity"], args)
    if kind == "present":
        entity = _resolve(pre["entity"], args)
        return world.get((entity, "presence")) == "present"
    if kind == "attr":
        entity = _resolve(pre["entity"], args)
        condition = Condition(op=pre["op"], values=tuple(str(v) for v in pre["values"]))
        return condition.evaluate(world, entity, pre["attribute"])
    if kind == "container_open":
        target = _resolve(pre["target"], args)
        if not target.endswith("_in"):
            return True
        container = target[: -len("_in")]
        if world.get((container, "openable")) != "yes":
            return True
        return world.get((container, "door_state")) == "open"
    raise _Halt(VERDICT_ERROR, f"unknown precondition kind {kind!r}")


def run_policy(
    policy: PolicySpec,
    env: EnvironmentSpec,
    trajectory: LogicalTrajectory,
    schema: TaskSchema,
    actions: ActionModel,
    budget: int = DEFAULT_BUDGET,
) -> SimOutcome:
    if env.trajectory_id != trajectory.trajectory_id:
        raise SchemaMismatch(
            f"environment realizes {env.trajectory_id!r}, got trajectory "
            f"{trajectory.trajectory_id!r}"
        )
    world = initial_world(env, schema)
    goals = goals_for_trajectory(schema, trajectory)
    trace: list[str] = []
    ticks = [0]

    def tick() -> None:
        if ticks[0] >= budget:
            raise _Halt(VERDICT_ERROR, f"node budget of {budget} exhausted")
        ticks[0] += 1

    def run_node(node) -> bool:
        tick()
        if isinstance(node, BtCondition):
            bound = schema.predicates.get(node.predicate)
            if bound is None:
                raise _Halt(VERDICT_ERROR, f"unknown predicate {node.predicate!r}")
            entity, attribute, condition = bound
            result = condition.evaluate(world, entity, attribute)
            trace.append(f"condition {node.predicate}: {'yes' if result else 'no'}")
            return result
        if isinstance(node, BtAction):
            parts = node.text.split()
            verb, arg_values = parts[0], parts[1:]
            spec = actions.get(verb)
            if spec is None:
                raise _Halt(VERDICT_ERROR, f"unknown action verb {verb!r}")
            if len(arg_values) != len(spec.params):
                raise _Halt(
                    VERDICT_ERROR,
                    f"action {verb!r} takes {len(spec.params)} arguments, got {len(arg_values)}",
                )
            args = dict(zip(spec.params, arg_values))
            for pre in spec.preconditions:
                if not _precondition_holds(pre, world, args):
                    raise _Halt(
                        VERDICT_CAUSAL,
                        f"action '{node.text}' violates precondition {pre['kind']}",
                    )
            for effect in spec.effects:
                entity = _resolve(effect["entity"], args)
                value = _resolve(effect["value"], args)
                world[(entity, effect["attribute"])] = value
            trace.append(f"action {node.text}: done")
            return True
        if isinstance(node, BtSequence):
            for child in node.children:
                if not run_node(child):
                    return False
            return True
        # BtSelector
        for child in node.children:
            if run_node(child):
                return True
        return False

    try:
        success = run_node(policy.root)
    except _Halt as halt:
        trace.append(f"halt: {halt.detail}")
        return SimOutcome(verdict=halt.verdict, ticks=ticks[0], trace=trace, detail=halt.detail)

    unmet = [g for g in goals if not g.satisfied(world)]
    if success and not unmet:
        return SimOutcome(verdict=VERDICT_PASS, ticks=ticks[0], trace=trace)
    if not success:
        detail = "behavior tree returned failure"
    else:
        detail = "unmet goals: " + ", ".join(
            f"({g.entity}, {g.attribute}) != {g.value}" for g in unmet
        )
    return SimOutcome(verdict=VERDICT_GOAL, ticks=ticks[0], trace=trace, detail=detail)


# ---------------------------------------------------------------------------
# scenario validity and fault detection
# ---------------------------------------------------------------------------


def scenario_validity(
    env: EnvironmentSpec, schema: TaskSchema, physics: PhysicsReport
) -> tuple[bool, list[str]]:
    """Is this environment a usable test scenario?

    Physics must pass on all three dimensions and every required task entity
    must be present.
    """
    reasons: list[str] = []
    if not physics.ok:
        dims = [
            name
            for name, ok in (
                ("floor_plan", physics.floor_plan_ok),
                ("entity", physics.entity_ok),
                ("relation", physics.relation_ok),
            )
            if not ok
        ]
        reasons.append("physics validation failed: " + ", ".join(dims))
    placed = {o.id for o in env.objects}
    missing = [e for e in schema.required_entities if e not in placed]
    if missing:
        reasons.append("lacks task-related objects: " + ", ".join(missing))
    return (not reasons, reasons)


def detected(outcomes: list[SimOutcome]) -> bool:
    """A faulty policy counts as detected when any environment trips it."""
    return any(o.verdict != VERDICT_PASS for o in outcomes)


def fault_detection_rate(outcomes_by_policy: dict) -> float:
    """Fraction of (faulty) policies detected across their environment runs.

    Pass only the policies that actually carry a fault; 1.0 when empty.
    """
    if not outcomes_by_policy:
        return 1.0
    hits = sum(1 for outcomes in outcomes_by_policy.values() if detected(outcomes))
    return hits / len(outcomes_by_policy)
