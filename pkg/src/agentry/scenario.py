"""Scenario files: a declarative JSON description of a simulated world.

A scenario lists locations, agents with their behavior trees, an optional
test repository, optional latency configuration, and an optional golden
trace to compare runs against. Behavior trees use the behavior
serialization format plus three late-bound markers the loader substitutes:

* ``{"$location": "name"}`` - the location object created for that name
* ``{"$agent": i}`` - the id value assigned to the i-th agent entry
* ``{"$tests": true}`` - the scenario's test repository path

Relative paths (``tests``, ``expected``) resolve against the scenario
file's own directory so scenario bundles stay portable.
"""

from __future__ import annotations

import difflib
import json
from pathlib import Path
from typing import Any, Optional, Union

from .actions import ActionRegistry
from .errors import MalformedRepository, ScenarioError
from .model import AgentId, Behavior, LocationId, behavior_from_dict, behavior_kinds, location_to_jsonable
from .repository import load_tests
from .simulator import Fixed, LatencyModel, PerLink, SimConfig, SimPlatform, UniformRange

SCENARIO_FORMAT_VERSION = 1

_LATENCY_KINDS = ("fixed", "uniform", "per_link")


def _suggest(name: str, known: list[str]) -> str:
    close = difflib.get_close_matches(name, known, n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _validate_latency(spec: Any, path: str, problems: list[str]) -> None:
    if not isinstance(spec, dict):
        problems.append(f"{path}: latency must be an object")
        return
    kind = spec.get("kind")
    if kind not in _LATENCY_KINDS:
        problems.append(f"{path}/kind: unknown latency kind {kind!r}{_suggest(str(kind), list(_LATENCY_KINDS))}")
        return
    try:
        _parse_latency(spec)
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"{path}: {exc}")


def _validate_behavior(spec: Any, path: str, locations: list[str], n_agents: int, problems: list[str]) -> None:
    if not isinstance(spec, dict):
        problems.append(f"{path}: behavior spec must be an object")
        return
    kind = spec.get("kind")
    known = behavior_kinds()
    if not isinstance(kind, str) or kind not in known:
        problems.append(f"{path}/kind: unknown behavior kind {kind!r}{_suggest(str(kind), known)}")
        return
    # Markers must point at things the scenario actually declares.
    _validate_markers(spec, path, locations, n_agents, problems)
    try:
        dummy_locations = {name: LocationId(i, name) for i, name in enumerate(locations)}
        dummy_agents = [AgentId(i + 1) for i in range(n_agents)]
        behavior_from_dict(_substitute(spec, dummy_locations, dummy_agents, "tests"))
    except Exception as exc:
        problems.append(f"{path}: {exc}")


def _validate_markers(value: Any, path: str, locations: list[str], n_agents: int, problems: list[str]) -> None:
    if isinstance(value, dict):
        if set(value) == {"$location"}:
            name = value["$location"]
            if name not in locations:
                problems.append(f"{path}: unknown location {name!r}{_suggest(str(name), locations)}")
            return
        if set(value) == {"$agent"}:
            idx = value["$agent"]
            if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < n_agents:
                problems.append(f"{path}: $agent index {idx!r} out of range (have {n_agents} agents)")
            return
        for key, item in value.items():
            _validate_markers(item, f"{path}/{key}", locations, n_agents, problems)
    elif isinstance(value, list):
        for i, item in enumerate(value):
            _validate_markers(item, f"{path}/{i}", locations, n_agents, problems)


def _agent_behavior_specs(entry: dict, path: str, problems: list[str]) -> list[Any]:
    """An agent entry carries either one tree ("behavior") or a list."""
    if "behavior" in entry and "behaviors" in entry:
        problems.append(f"{path}: give either 'behavior' or 'behaviors', not both")
        return []
    if "behavior" in entry:
        return [entry["behavior"]]
    specs = entry.get("behaviors")
    if specs is None:
        problems.append(f"{path}: missing 'behavior' (or 'behaviors')")
        return []
    if not isinstance(specs, list) or not specs:
        problems.append(f"{path}/behaviors: must be a non-empty list")
        return []
    return specs


def validate_scenario_doc(doc: Any, base_dir: Optional[Path] = None) -> list[str]:
    """Collect every problem in a parsed scenario document.

    Paths in diagnostics are JSON-pointer style. An empty list means the
    scenario can be built.
    """
    problems: list[str] = []
    if not isinstance(doc, dict):
        return ["/: scenario must be a JSON object"]
    version = doc.get("format_version")
    if version is None:
        problems.append("/format_version: missing")
    elif version != SCENARIO_FORMAT_VERSION:
        problems.append(f"/format_version: unsupported version {version!r} (expected {SCENARIO_FORMAT_VERSION})")

    known_keys = {"format_version", "seed", "config", "locations", "agents", "tests", "expected"}
    for key in doc:
        if key not in known_keys:
            problems.append(f"/{key}: unknown field{_suggest(key, sorted(known_keys))}")

    seed = doc.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
        problems.append(f"/seed: must be a non-negative integer, got {seed!r}")

    config = doc.get("config", {})
    if not isinstance(config, dict):
        problems.append("/config: must be an object")
        config = {}
    for key in config:
        if key not in ("message_latency", "migration_latency", "max_ticks"):
            problems.append(f"/config/{key}: unknown field{_suggest(key, ['message_latency', 'migration_latency', 'max_ticks'])}")
    for field in ("message_latency", "migration_latency"):
        if field in config:
            _validate_latency(config[field], f"/config/{field}", problems)
    max_ticks = config.get("max_ticks")
    if max_ticks is not None and (not isinstance(max_ticks, int) or isinstance(max_ticks, bool) or max_ticks < 1):
        problems.append(f"/config/max_ticks: must be a positive integer, got {max_ticks!r}")

    locations = doc.get("locations")
    names: list[str] = []
    if not isinstance(locations, list) or not locations:
        problems.append("/locations: must be a non-empty list of names")
    else:
        for i, name in enumerate(locations):
            if not isinstance(name, str) or not name:
                problems.append(f"/locations/{i}: location name must be a non-empty string")
            elif name in names:
                problems.append(f"/locations/{i}: duplicate location name {name!r}")
            else:
                names.append(name)

    agents = doc.get("agents", [])
    if not isinstance(agents, list):
        problems.append("/agents: must be a list")
        agents = []
    for i, entry in enumerate(agents):
        path = f"/agents/{i}"
        if not isinstance(entry, dict):
            problems.append(f"{path}: agent entry must be an object")
            continue
        where = entry.get("location")
        if not isinstance(where, str) or (names and where not in names):
            problems.append(f"{path}/location: unknown location {where!r}{_suggest(str(where), names)}")
        for j, spec in enumerate(_agent_behavior_specs(entry, path, problems)):
            _validate_behavior(spec, f"{path}/behaviors/{j}", names, len(agents), problems)

    tests = doc.get("tests")
    if tests is not None:
        if not isinstance(tests, str) or not tests:
            problems.append(f"/tests: must be a path string, got {tests!r}")
        else:
            repo = _resolve(tests, base_dir)
            if not repo.exists():
                problems.append(f"/tests: test repository not found: {repo}")
            else:
                try:
                    load_tests(repo)
                except MalformedRepository as exc:
                    problems.append(f"/tests: {exc}")
    elif _uses_tests_marker(doc.get("agents", [])):
        problems.append("/tests: required, a behavior uses the $tests marker")

    expected = doc.get("expected")
    if expected is not None and (not isinstance(expected, str) or not expected):
        problems.append(f"/expected: must be a path string, got {expected!r}")
    return problems


def _uses_tests_marker(value: Any) -> bool:
    if isinstance(value, dict):
        if set(value) == {"$tests"}:
            return True
        return any(_uses_tests_marker(v) for v in value.values())
    if isinstance(value, list):
        return any(_uses_tests_marker(v) for v in value)
    return False


def validate_scenario(path: Union[str, Path]) -> list[str]:
    """Validate a scenario file; parse errors come back as diagnostics."""
    path = Path(path)
    if not path.exists():
        return [f"/: scenario file not found: {path}"]
    try:
        doc = json.loads(path.read_text())
    except ValueError as exc:
        return [f"/: not valid JSON: {exc}"]
    return validate_scenario_doc(doc, path.parent)


def load_scenario(path: Union[str, Path]) -> dict:
    """Parse and validate, raising ScenarioError listing every problem."""
    problems = validate_scenario(path)
    if problems:
        raise ScenarioError(f"invalid scenario {path}", problems)
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# Building
# ---------------------------------------------------------------------------


def _resolve(path: str, base_dir: Optional[Path]) -> Path:
    p = Path(path)
    if not p.is_absolute() and base_dir is not None:
        p = base_dir / p
    return p


def _parse_latency(spec: dict) -> LatencyModel:
    kind = spec["kind"]
    if kind == "fixed":
        return Fixed(int(spec["ticks"]))
    if kind == "uniform":
        return UniformRange(int(spec["lo"]), int(spec["hi"]))
    table = {(str(src), str(dst)): int(ticks) for src, dst, ticks in spec.get("links", [])}
    return PerLink(table, default=int(spec.get("default", 1)))


def _substitute(value: Any, locations: dict[str, LocationId], agents: list[AgentId], tests: str) -> Any:
    if isinstance(value, dict):
        if set(value) == {"$location"}:
            return location_to_jsonable(locations[value["$location"]])
        if set(value) == {"$agent"}:
            return agents[value["$agent"]].value
        if set(value) == {"$tests"}:
            return tests
        return {k: _substitute(v, locations, agents, tests) for k, v in value.items()}
    if isinstance(value, list):
        return [_substitute(v, locations, agents, tests) for v in value]
    return value


def effective_seed(doc: dict, override: Optional[int] = None) -> int:
    """Seed precedence: explicit override, then scenario, then 0."""
    if override is not None:
        return override
    return int(doc.get("seed", 0))


def build_platform(
    doc: dict,
    *,
    seed: Optional[int] = None,
    base_dir: Optional[Path] = None,
    registry: Optional[ActionRegistry] = None,
) -> SimPlatform:
    """Build the world a validated scenario document describes.

    Agent ids are reserved for all entries before any behavior is built, so
    ``$agent`` markers may point forward.
    """
    config_doc = doc.get("config", {})
    kwargs: dict[str, Any] = {"seed": effective_seed(doc, seed)}
    if "message_latency" in config_doc:
        kwargs["message_latency"] = _parse_latency(config_doc["message_latency"])
    if "migration_latency" in config_doc:
        kwargs["migration_latency"] = _parse_latency(config_doc["migration_latency"])
    if "max_ticks" in config_doc:
        kwargs["max_ticks"] = int(config_doc["max_ticks"])
    platform = SimPlatform(SimConfig(**kwargs), registry=registry)

    locations = {name: platform.create_location(name) for name in doc["locations"]}
    entries = doc.get("agents", [])
    ids = [platform.reserve_agent_id() for _ in entries]
    tests = str(_resolve(doc["tests"], base_dir)) if doc.get("tests") else ""
    for entry, agent_id in zip(entries, ids):
        specs = [entry["behavior"]] if "behavior" in entry else entry["behaviors"]
        behaviors: list[Behavior] = [
            behavior_from_dict(_substitute(spec, locations, ids, tests)) for spec in specs
        ]
        platform.spawn_agent(locations[entry["location"]], behaviors, agent_id=agent_id)
    return platform


# ---------------------------------------------------------------------------
# Golden traces
# ---------------------------------------------------------------------------


def render_trace(platform: SimPlatform) -> str:
    """The full on-disk trace text: versioned header plus one event per line."""
    header = json.dumps({"format_version": 1}, separators=(",", ":"))
    return header + "\n" + platform.trace().to_jsonl()


def first_divergence(actual: str, golden: str) -> Optional[str]:
    """None when identical; otherwise a short first-divergence report."""
    if actual == golden:
        return None
    actual_lines = actual.splitlines()
    golden_lines = golden.splitlines()
    for i, (got, want) in enumerate(zip(actual_lines, golden_lines)):
        if got != want:
            return f"trace mismatch at line {i + 1}\nexpected: {want}\nactual:   {got}"
    n, m = len(actual_lines), len(golden_lines)
    i = min(n, m)
    got = actual_lines[i] if i < n else "(end of trace)"
    want = golden_lines[i] if i < m else "(end of trace)"
    return f"trace mismatch at line {i + 1}\nexpected: {want}\nactual:   {got}"
