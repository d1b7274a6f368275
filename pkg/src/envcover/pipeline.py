"""Stage pipeline over a run directory.

Each stage reads its inputs from the run directory (or the task bundle) and
writes its outputs back, so stages can run one at a time or chained by
run_all. Layout under the run root:

    plans/             task, plan document, factors, derivation report
    trajectories/      universe ids and the selected minimal set
    environments/      one serialized environment per selected trajectory
    reports/           build stats, physics, validity, simulation, report
    manifest.json      config echo and wall-clock timings

Every artifact except manifest.json is byte-deterministic for a fixed task
bundle, seed, and grid: reruns may be compared file-by-file. The manifest is
the one place wall-clock time appears.

A task bundle is a directory holding task.json plus, by convention,
schema.json, action_model.json, catalog.json, cassette.json, and policies/.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .assets import AssetCatalog, load_catalog
from .derivation import DerivationResult, derive
from .environment import EnvironmentSpec, deserialize_environment, serialize_environment
from .errors import ConfigError, MissingInput, SchemaViolation
from .metrics import (
    logic_coverage,
    logic_coverage_atomic,
    selection_jaccard,
    validity_rate,
)
from .providers import (
    PlanProvider,
    RecordingChannel,
    SceneProvider,
    load_cassette,
    open_channel,
    save_cassette,
)
from .scene import build_environment
from .schema import TaskSchema, load_schema
from .simulation import (
    DEFAULT_BUDGET,
    fault_detection_rate,
    load_action_model,
    load_policy,
    run_policy,
    scenario_validity,
)
from .solver import SolverConfig
from .task_model import SubtaskSpec, TaskSpec, UncertainFactor, parse_behavior_plan
from .trajectories import (
    cartesian_trajectories,
    deserialize_trajectory,
    minimal_trajectory_selection,
    paths_per_subtask,
    serialize_trajectory,
)
from .validator import physics_pass_rate, validate_physics

REFERENCE_POLICY_LABEL = "correct"


@dataclass(frozen=True)
class TaskBundle:
    task_file: Path
    schema_file: Path
    action_model_file: Path
    catalog_file: Path
    cassette_file: Path | None
    policies_dir: Path | None


def resolve_bundle(task_path: str, cassette: str | None = None, catalog: str | None = None) -> TaskBundle:
    """Locate bundle files from --task plus optional overrides."""
    p = Path(task_path)
    if p.is_dir():
        base, task_file = p, p / "task.json"
    else:
        base, task_file = p.parent, p
    if not task_file.is_file():
        raise ConfigError(f"no task file at {task_file}")

    def sibling(name: str) -> Path:
        return base / name

    cassette_file = Path(cassette) if cassette else sibling("cassette.json")
    policies = sibling("policies")
    return TaskBundle(
        task_file=task_file,
        schema_file=sibling("schema.json"),
        action_model_file=sibling("action_model.json"),
        catalog_file=Path(catalog) if catalog else sibling("catalog.json"),
        cassette_file=cassette_file if cassette_file.is_file() or cassette else None,
        policies_dir=policies if policies.is_dir() else None,
    )


def load_task(path: Path) -> TaskSpec:
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read task file {path}: {exc}") from exc
    for key in ("id", "description", "environment_type"):
        if key not in doc:
            raise SchemaViolation(f"task file is missing {key!r}")
    return TaskSpec(
        id=doc["id"],
        description=doc["description"],
        environment_type=doc["environment_type"],
    )


class RunPaths:
    def __init__(self, root):
        self.root = Path(root)
        self.plans = self.root / "plans"
        self.trajectories = self.root / "trajectories"
        self.environments = self.root / "environments"
        self.reports = self.root / "reports"

    def ensure(self) -> None:
        for d in (self.root, self.plans, self.trajectories, self.environments, self.reports):
            d.mkdir(parents=True, exist_ok=True)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_json_ordered(path: Path, doc) -> None:
    """Like _write_json but keeps dict insertion order.

    Branch maps inside plan documents are order-sensitive: response order
    fixes path enumeration order, which in turn fixes which trajectories the
    greedy selection keeps. Sorting those keys would silently reorder the
    whole downstream run.
    """
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _read_json(path: Path, what: str):
    if not path.is_file():
        raise MissingInput(f"{what} not found at {path}; run the earlier stage first")
    return json.loads(path.read_text())


def _persist_records(cassette_file: Path, new_records: list[dict]) -> None:
    """Merge freshly recorded exchanges into the cassette, first write wins."""
    existing = load_cassette(cassette_file) if cassette_file.is_file() else []
    seen = {r["request_hash"] for r in existing}
    merged = list(existing)
    for rec in new_records:
        if rec["request_hash"] not in seen:
            merged.append(rec)
            seen.add(rec["request_hash"])
    save_cassette(cassette_file, merged)


def _open_provider_channel(bundle: TaskBundle, live_endpoint: str | None):
    cassette = str(bundle.cassette_file) if bundle.cassette_file else None
    if cassette is None and live_endpoint is None:
        raise ConfigError(
            "no exchange source: pass --cassette, --live-endpoint, or keep a "
            "cassette.json next to the task file"
        )
    if live_endpoint and bundle.cassette_file and not bundle.cassette_file.is_file():
        # recording into a fresh cassette: nothing to replay yet
        return RecordingChannel(open_channel(live_endpoint=live_endpoint))
    return open_channel(cassette=cassette, live_endpoint=live_endpoint)


def _finish_channel(channel, bundle: TaskBundle) -> None:
    if isinstance(channel, RecordingChannel) and bundle.cassette_file:
        _persist_records(bundle.cassette_file, channel.records)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_derive(
    paths: RunPaths,
    bundle: TaskBundle,
    live_endpoint: str | None = None,
    max_rounds: int = 3,
) -> DerivationResult:
    paths.ensure()
    task = load_task(bundle.task_file)
    channel = _open_provider_channel(bundle, live_endpoint)
    result = derive(PlanProvider(channel), task, max_rounds=max_rounds)
    _finish_channel(channel, bundle)

    _write_json(
        paths.plans / "task.json",
        {"id": task.id, "description": task.description, "environment_type": task.environment_type},
    )
    _write_json_ordered(paths.plans / "plan_document.json", result.plan_document)
    _write_json(
        paths.plans / "subtasks.json",
        [
            {
                "id": st.id,
                "summary": st.summary,
                "factors": [
                    {"name": f.name, "domain": list(f.domain), "aliases": list(f.aliases)}
                    for f in st.factors
                ],
            }
            for st in result.subtasks
        ],
    )
    _write_json(
        paths.plans / "derivation_report.json",
        {
            "status": result.status,
            "rounds_used": result.rounds_used,
            "violations": [
                {"rule": v.rule, "location": v.location, "message": v.message}
                for v in result.report.violations
            ],
        },
    )
    return result


def _load_plans(paths: RunPaths):
    plan_doc = _read_json(paths.plans / "plan_document.json", "plan document")
    raw_subtasks = _read_json(paths.plans / "subtasks.json", "subtask list")
    subtasks = [
        SubtaskSpec(
            id=s["id"],
            summary=s["summary"],
            factors=tuple(
                UncertainFactor(
                    name=f["name"],
                    domain=tuple(f["domain"]),
                    aliases=tuple(f.get("aliases", ())),
                )
                for f in s["factors"]
            ),
        )
        for s in raw_subtasks
    ]
    trees = parse_behavior_plan(plan_doc, [s.id for s in subtasks])
    return subtasks, trees


def stage_collect(paths: RunPaths) -> list:
    paths.ensure()
    _, trees = _load_plans(paths)
    universe = cartesian_trajectories(paths_per_subtask(trees))
    selected = minimal_trajectory_selection(universe)
    _write_json(
        paths.trajectories / "universe.json",
        {"count": len(universe), "trajectory_ids": [t.trajectory_id for t in universe]},
    )
    _write_json(
        paths.trajectories / "selected.json",
        {"count": len(selected), "trajectories": [serialize_trajectory(t) for t in selected]},
    )
    return selected


def _load_selected(paths: RunPaths) -> list:
    doc = _read_json(paths.trajectories / "selected.json", "selected trajectories")
    return [deserialize_trajectory(raw) for raw in doc["trajectories"]]


def _env_file(paths: RunPaths, index: int) -> Path:
    return paths.environments / f"env-{index:03d}.json"


def _load_environments(paths: RunPaths) -> list[tuple[str, EnvironmentSpec]]:
    files = sorted(paths.environments.glob("env-*.json"))
    if not files:
        raise MissingInput(
            f"no environments under {paths.environments}; run the build stage first"
        )
    return [(f.stem, deserialize_environment(f.read_text())) for f in files]


def stage_build(
    paths: RunPaths,
    bundle: TaskBundle,
    live_endpoint: str | None = None,
    seed: int = 0,
    grid: float = 0.1,
    jobs: int = 1,
) -> list[EnvironmentSpec]:
    paths.ensure()
    selected = _load_selected(paths)
    schema = load_schema(str(bundle.schema_file))
    catalog = load_catalog(str(bundle.catalog_file))
    config = SolverConfig(grid_resolution=grid, seed=seed)

    channels = []

    def build_one(index: int, trajectory):
        channel = _open_provider_channel(bundle, live_endpoint)
        channels.append(channel)
        provider = SceneProvider(channel)
        return build_environment(
            provider, catalog, schema, trajectory, f"env-{index:03d}", config
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(build_one, i, t) for i, t in enumerate(selected)
            ]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [build_one(i, t) for i, t in enumerate(selected)]

    for channel in channels:
        _finish_channel(channel, bundle)

    stats = {}
    environments = []
    for i, outcome in enumerate(outcomes):
        env = outcome.environment
        _env_file(paths, i).write_text(serialize_environment(env))
        environments.append(env)
        stats[env.id] = {
            "assignments": outcome.solver_stats.get("assignments", 0),
            "backtracks": outcome.solver_stats.get("backtracks", 0),
            "relaxed_relations": list(env.relaxed_relations),
            "revision_rounds": outcome.revision_rounds,
        }
    _write_json(paths.reports / "build_stats.json", {"environments": stats})
    return environments


def stage_validate(paths: RunPaths, bundle: TaskBundle) -> dict:
    paths.ensure()
    schema = load_schema(str(bundle.schema_file))
    envs = _load_environments(paths)
    physics = {}
    validity = {}
    reports = []
    flags = []
    for name, env in envs:
        report = validate_physics(env)
        reports.append(report)
        physics[name] = {
            "ok": report.ok,
            "floor_plan_ok": report.floor_plan_ok,
            "entity_ok": report.entity_ok,
            "relation_ok": report.relation_ok,
            "failures": [
                {"rule": f.rule, "location": f.location, "message": f.message}
                for f in report.failures
            ],
            "skipped_relations": report.skipped_relations,
        }
        valid, reasons = scenario_validity(env, schema, report)
        flags.append(valid)
        validity[name] = {"valid": valid, "reasons": reasons}
    physics_doc = {"pass_rate": physics_pass_rate(reports), "environments": physics}
    validity_doc = {"rate": validity_rate(flags), "environments": validity}
    _write_json(paths.reports / "physics.json", physics_doc)
    _write_json(paths.reports / "validity.json", validity_doc)
    return {"physics": physics_doc, "validity": validity_doc}


def stage_simulate(paths: RunPaths, bundle: TaskBundle, budget: int = DEFAULT_BUDGET) -> dict:
    paths.ensure()
    if bundle.policies_dir is None:
        raise ConfigError(f"no policies directory next to {bundle.task_file}")
    schema = load_schema(str(bundle.schema_file))
    actions = load_action_model(str(bundle.action_model_file))
    selected = _load_selected(paths)
    envs = _load_environments(paths)
    if len(selected) != len(envs):
        raise MissingInput(
            f"{len(envs)} environments but {len(selected)} selected trajectories; "
            "rerun the build stage"
        )
    by_id = {t.trajectory_id: t for t in selected}

    policies = {}
    for policy_file in sorted(bundle.policies_dir.glob("*.json")):
        policy = load_policy(str(policy_file))
        label = policy.label or policy_file.stem
        policies[label] = (policy_file.name, policy)

    doc = {"budget": budget, "policies": {}}
    detected_by_label = {}
    total_ticks = 0
    for label in sorted(policies):
        file_name, policy = policies[label]
        per_env = {}
        outcomes = []
        for name, env in envs:
            trajectory = by_id.get(env.trajectory_id)
            if trajectory is None:
                raise MissingInput(
                    f"environment {name} realizes {env.trajectory_id!r}, which is not "
                    "in the selected trajectory set"
                )
            outcome = run_policy(policy, env, trajectory, schema, actions, budget=budget)
            outcomes.append(outcome)
            total_ticks += outcome.ticks
            per_env[name] = {
                "verdict": outcome.verdict,
                "ticks": outcome.ticks,
                "detail": outcome.detail,
            }
        detected = any(o.verdict != "pass" for o in outcomes)
        detected_by_label[label] = outcomes
        doc["policies"][label] = {
            "file": file_name,
            "detected": detected,
            "environments": per_env,
        }
    faulty = {k: v for k, v in detected_by_label.items() if k != REFERENCE_POLICY_LABEL}
    doc["faulty_policies"] = sorted(faulty)
    doc["fault_detection_rate"] = fault_detection_rate(faulty)
    doc["total_ticks"] = total_ticks
    _write_json(paths.reports / "simulation.json", doc)
    return doc


def stage_report(paths: RunPaths) -> dict:
    paths.ensure()
    subtasks, trees = _load_plans(paths)
    task_doc = _read_json(paths.plans / "task.json", "task echo")
    universe_doc = _read_json(paths.trajectories / "universe.json", "trajectory universe")
    selected = _load_selected(paths)
    envs = _load_environments(paths)
    physics_doc = _read_json(paths.reports / "physics.json", "physics report")
    validity_doc = _read_json(paths.reports / "validity.json", "validity report")
    simulation_doc = _read_json(paths.reports / "simulation.json", "simulation report")

    realized_ids = {env.trajectory_id for _, env in envs}
    realized = [t for t in selected if t.trajectory_id in realized_ids]
    paths_stat = logic_coverage(trees, realized)
    atomic_stat = logic_coverage_atomic(subtasks, realized)
    doc = {
        "task_id": task_doc["id"],
        "trajectories": {
            "universe": universe_doc["count"],
            "selected": len(selected),
            "realized": len(realized),
        },
        "coverage": {
            "paths": {
                "covered": paths_stat.covered,
                "universe": paths_stat.universe,
                "ratio": paths_stat.ratio,
            },
            "atomic": {
                "covered": atomic_stat.covered,
                "universe": atomic_stat.universe,
                "ratio": atomic_stat.ratio,
            },
            "jaccard_selected_vs_universe": selection_jaccard(trees, realized),
        },
        "physics": {"pass_rate": physics_doc["pass_rate"]},
        "validity": {"rate": validity_doc["rate"]},
        "simulation": {
            "fault_detection_rate": simulation_doc["fault_detection_rate"],
            "total_ticks": simulation_doc["total_ticks"],
        },
        "environments": sorted(name for name, _ in envs),
    }
    _write_json(paths.reports / "report.json", doc)
    return doc


def run_all(
    out_dir: str,
    task_path: str,
    cassette: str | None = None,
    catalog: str | None = None,
    live_endpoint: str | None = None,
    seed: int = 0,
    grid: float = 0.1,
    jobs: int = 1,
    budget: int = DEFAULT_BUDGET,
    max_rounds: int = 3,
) -> dict:
    """All stages in order; returns the final report document.

    Wall-clock timings land in manifest.json and nowhere else, so two runs
    with the same inputs match byte-for-byte on every other file.
    """
    import time

    paths = RunPaths(out_dir)
    bundle = resolve_bundle(task_path, cassette=cassette, catalog=catalog)
    timings = []

    def timed(name: str, fn):
        started = time.monotonic()
        result = fn()
        timings.append({"name": name, "seconds": round(time.monotonic() - started, 3)})
        return result

    derivation = timed(
        "derive", lambda: stage_derive(paths, bundle, live_endpoint, max_rounds)
    )
    if derivation.status != "ok":
        raise MissingInput(
            "derivation finished with violations "
            f"({len(derivation.report.violations)}); not building scenes from a "
            "failing plan"
        )
    timed("collect", lambda: stage_collect(paths))
    timed(
        "build",
        lambda: stage_build(paths, bundle, live_endpoint, seed=seed, grid=grid, jobs=jobs),
    )
    timed("validate", lambda: stage_validate(paths, bundle))
    timed("simulate", lambda: stage_simulate(paths, bundle, budget=budget))
    report = timed("report", lambda: stage_report(paths))

    manifest = {
        "task": str(bundle.task_file),
        "config": {
            "seed": seed,
            "grid": grid,
            "jobs": jobs,
            "budget": budget,
            "max_rounds": max_rounds,
            "live_endpoint": live_endpoint or "",
        },
        "stages": timings,
    }
    _write_json(paths.root / "manifest.json", manifest)
    return report
