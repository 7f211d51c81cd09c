"""A deterministic text-rendered household POMDP.

One room-scale kitchen: seven fixtures (three plain surfaces, a sink with a
faucet, a microwave, a fridge, a cabinet), discrete objects with cleanliness
and temperature attributes, and an agent that can hold one object. State
transformations are recipes, not atomic skills: running the faucet washes
whatever sits in the sink, a closed running microwave heats its contents,
closing the fridge chills what is inside. The verbs heat/cool/clean are
still accepted so an agent can attempt them, but they only teach: attempting
`clean(plate)` with the plate on the counter changes nothing and the
feedback names the missing recipe steps.

Observations are partial. Objects inside a closed fixture are invisible and
absent from the valid-action catalog until it is opened. Every observation
carries the current catalog, and all feedback comes from a fixed set of
templates so downstream prompts stay stable.
"""

from __future__ import annotations

import enum
import json
import logging
import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from elite.trajectory import TrajectoryStep

logger = logging.getLogger(__name__)

DEFAULT_T_MAX = 30
HELD = "held"

# ---------------------------------------------------------------------------
# fixtures

@dataclass(frozen=True)
class Fixture:
    name: str
    preposition: str
    openable: bool = False
    toggleable: bool = False
    device: str = ""
    cleans: bool = False
    heats: bool = False
    cools: bool = False


FIXTURES: dict[str, Fixture] = {
    f.name: f
    for f in (
        Fixture("counter", "on"),
        Fixture("table", "on"),
        Fixture("shelf", "on"),
        Fixture("sink", "in", toggleable=True, device="faucet", cleans=True),
        Fixture("microwave", "in", openable=True, toggleable=True, device="microwave", heats=True),
        Fixture("fridge", "in", openable=True, cools=True),
        Fixture("cabinet", "in", openable=True),
    )
}

ALL_LOCATIONS = tuple(FIXTURES)

_DEVICE_TO_FIXTURE = {f.device: f.name for f in FIXTURES.values() if f.toggleable}

# objects carrying a cleanliness axis (clean/dirty)
_CLEAN_AXIS = frozenset(
    {
        "plate", "mug", "bowl", "pan", "cup", "jar", "tin", "pot", "tray", "kettle",
        "spoon", "fork", "knife", "spatula", "board", "glass", "pitcher", "ladle",
        "whisk", "dish",
    }
)
# objects carrying a temperature axis (hot/cold/room)
_TEMP_AXIS = frozenset(
    {
        "soup", "rice", "stew", "pie", "potato", "noodles", "porridge", "curry",
        "pasta", "beans", "milk", "juice", "cocoa", "tea", "coffee",
    }
)

# ---------------------------------------------------------------------------
# actions

class Skill(str, enum.Enum):
    GOTO = "goto"
    PICK = "pick"
    PLACE = "place"
    OPEN = "open"
    CLOSE = "close"
    TOGGLE = "toggle"
    HEAT = "heat"
    COOL = "cool"
    CLEAN = "clean"
    NOOP = "noop"


_ARITY = {
    Skill.GOTO: 1,
    Skill.PICK: 1,
    Skill.PLACE: 2,
    Skill.OPEN: 1,
    Skill.CLOSE: 1,
    Skill.TOGGLE: 1,
    Skill.HEAT: 1,
    Skill.COOL: 1,
    Skill.CLEAN: 1,
    Skill.NOOP: 0,
}


@dataclass(frozen=True)
class Action:
    skill: Skill
    args: tuple[str, ...] = ()

    def render(self) -> str:
        if self.skill is Skill.NOOP:
            return "noop"
        return f"{self.skill.value}({', '.join(self.args)})"


NOOP = Action(Skill.NOOP)

_ACTION_RE = re.compile(r"^\s*([a-z_]+)\s*\(([^()]*)\)\s*$")


def parse_action(text: str) -> Action | None:
    """Parse `skill(arg, ...)` or bare `noop`; None when the text is not an action."""
    lowered = text.strip().lower()
    if lowered == "noop":
        return NOOP
    match = _ACTION_RE.match(lowered)
    if match is None:
        return None
    try:
        skill = Skill(match.group(1))
    except ValueError:
        return None
    raw_args = match.group(2).strip()
    args = tuple(a.strip() for a in raw_args.split(",")) if raw_args else ()
    if any(not a for a in args):
        return None
    if len(args) != _ARITY[skill]:
        return None
    return Action(skill, args)

# ---------------------------------------------------------------------------
# world state

@dataclass
class ObjState:
    name: str
    place: str
    cleanliness: str | None = None
    temperature: str | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "place": self.place,
            "cleanliness": self.cleanliness,
            "temperature": self.temperature,
        }


def make_object(name: str, place: str, *, cleanliness: str | None = None, temperature: str | None = None) -> ObjState:
    if cleanliness is None and name in _CLEAN_AXIS:
        cleanliness = "clean"
    if temperature is None and name in _TEMP_AXIS:
        temperature = "room"
    return ObjState(name=name, place=place, cleanliness=cleanliness, temperature=temperature)


@dataclass
class WorldState:
    agent_at: str
    holding: str | None = None
    objects: dict[str, ObjState] = field(default_factory=dict)
    locations: tuple[str, ...] = ALL_LOCATIONS
    fixture_open: dict[str, bool] = field(default_factory=dict)
    fixture_on: dict[str, bool] = field(default_factory=dict)
    rng_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "agent_at": self.agent_at,
            "holding": self.holding,
            "locations": list(self.locations),
            "fixture_open": {k: self.fixture_open[k] for k in self.locations if k in self.fixture_open},
            "fixture_on": {k: self.fixture_on[k] for k in self.locations if k in self.fixture_on},
            "objects": [self.objects[k].to_dict() for k in self.objects],
            "rng_seed": self.rng_seed,
        }

    @staticmethod
    def from_dict(data: dict) -> "WorldState":
        objects = {}
        for record in data["objects"]:
            objects[record["name"]] = ObjState(
                name=record["name"],
                place=record["place"],
                cleanliness=record.get("cleanliness"),
                temperature=record.get("temperature"),
            )
        return WorldState(
            agent_at=data["agent_at"],
            holding=data.get("holding"),
            objects=objects,
            locations=tuple(data["locations"]),
            fixture_open=dict(data.get("fixture_open", {})),
            fixture_on=dict(data.get("fixture_on", {})),
            rng_seed=int(data.get("rng_seed", 0)),
        )

    def clone(self) -> "WorldState":
        return WorldState.from_dict(self.to_dict())


def standard_world(rng_seed: int = 0) -> WorldState:
    """The default kitchen: everything closed and off, milk chilling in the fridge."""
    world = WorldState(
        agent_at="counter",
        holding=None,
        locations=ALL_LOCATIONS,
        fixture_open={"microwave": False, "fridge": False, "cabinet": False},
        fixture_on={"sink": False, "microwave": False},
        rng_seed=rng_seed,
    )
    milk = make_object("milk", "fridge")
    milk.temperature = "cold"
    world.objects["milk"] = milk
    return world

# ---------------------------------------------------------------------------
# goals and task specs

class Category(str, enum.Enum):
    BASE = "base"
    LONG_HORIZON = "long_horizon"
    COMPLEX_INSTRUCTION = "complex_instruction"
    COMMON_SENSE = "common_sense"
    SPATIAL = "spatial"
    VISUAL_ATTRIBUTE = "visual_attribute"


_ATTR_VALUES = ("clean", "dirty", "hot", "cold")


@dataclass(frozen=True)
class Subgoal:
    object: str
    kind: str  # "at" or "attr"
    value: str

    def satisfied(self, state: WorldState) -> bool:
        obj = state.objects.get(self.object)
        if obj is None:
            return False
        if self.kind == "at":
            return obj.place == self.value
        return self.value in (obj.cleanliness, obj.temperature)

    def to_dict(self) -> dict:
        return {"object": self.object, "kind": self.kind, "value": self.value}

    @staticmethod
    def from_dict(data: dict) -> "Subgoal":
        return Subgoal(object=data["object"], kind=data["kind"], value=data["value"])


@dataclass(frozen=True)
class TaskSpec:
    id: str
    instruction: str
    category: Category
    initial: WorldState
    goal: tuple[Subgoal, ...]
    t_max: int = DEFAULT_T_MAX
    oracle: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "category": self.category.value,
            "initial": self.initial.to_dict(),
            "goal": [g.to_dict() for g in self.goal],
            "t_max": self.t_max,
            "oracle": list(self.oracle),
        }

    @staticmethod
    def from_dict(data: dict) -> "TaskSpec":
        return TaskSpec(
            id=data["id"],
            instruction=data["instruction"],
            category=Category(data["category"]),
            initial=WorldState.from_dict(data["initial"]),
            goal=tuple(Subgoal.from_dict(g) for g in data["goal"]),
            t_max=int(data.get("t_max", DEFAULT_T_MAX)),
            oracle=tuple(data.get("oracle", ())),
        )


class TaskValidationError(ValueError):
    def __init__(self, violations: list[str]) -> None:
        super().__init__("invalid task: " + "; ".join(violations))
        self.violations = violations


def validate_task(task: TaskSpec) -> list[str]:
    """Return every violated invariant (empty list = valid)."""
    violations: list[str] = []
    state = task.initial
    if not task.goal:
        violations.append("goal is empty")
    if task.t_max < 1:
        violations.append(f"t_max must be >= 1, got {task.t_max}")
    for loc in state.locations:
        if loc not in FIXTURES:
            violations.append(f"unknown location {loc}")
    if state.agent_at not in state.locations:
        violations.append(f"agent at unknown location {state.agent_at}")
    for name, obj in state.objects.items():
        if name != obj.name:
            violations.append(f"object key {name} does not match name {obj.name}")
        if obj.place != HELD and obj.place not in state.locations:
            violations.append(f"object {name} at unknown location {obj.place}")
        if obj.place == HELD and state.holding != name:
            violations.append(f"object {name} marked held but agent holds {state.holding!r}")
    if state.holding is not None:
        held = state.objects.get(state.holding)
        if held is None:
            violations.append(f"agent holds unknown object {state.holding}")
        elif held.place != HELD:
            violations.append(f"held object {state.holding} also placed at {held.place}")
    for goal in task.goal:
        obj = state.objects.get(goal.object)
        if obj is None:
            violations.append(f"goal references unknown object {goal.object}")
            continue
        if goal.kind == "at":
            if goal.value not in state.locations:
                violations.append(f"goal references unknown location {goal.value}")
        elif goal.kind == "attr":
            if goal.value not in _ATTR_VALUES:
                violations.append(f"goal attribute {goal.value} not one of {_ATTR_VALUES}")
            elif goal.value in ("clean", "dirty") and obj.cleanliness is None:
                violations.append(f"goal needs a cleanliness axis on {goal.object}")
            elif goal.value in ("hot", "cold") and obj.temperature is None:
                violations.append(f"goal needs a temperature axis on {goal.object}")
        else:
            violations.append(f"unknown goal kind {goal.kind}")
    if task.goal and not violations and all(g.satisfied(state) for g in task.goal):
        violations.append("goal already satisfied in the initial state")
    return violations

# ---------------------------------------------------------------------------
# feedback templates (enumerated so distiller prompts stay stable)

F_GOTO_OK = "You move to the {place}."
F_GOTO_SAME = "You are already at the {place}."
F_NO_PLACE = "There is no place called {place}."
F_PICK_OK = "You pick up the {obj}."
F_NOT_HERE = "{obj} is not at your location."
F_NO_OBJECT = "There is no object called {obj}."
F_HANDS_FULL = "Your hands are full. Put down the {held} first."
F_PLACE_OK = "You put the {obj} {prep} the {place}."
F_NOT_HOLDING = "You are not holding {obj}."
F_NOT_AT = "You are at the {current}, not the {place}."
F_CLOSED = "The {place} is closed. Open it first."
F_OPEN_OK = "You open the {place}."
F_OPEN_STOPS = "You open the {place}. It stops running."
F_CLOSE_OK = "You close the {place}."
F_NOT_OPENABLE = "The {place} cannot be opened or closed."
F_ALREADY_OPEN = "The {place} is already open."
F_ALREADY_CLOSED = "The {place} is already closed."
F_TOGGLE_ON = "You turn on the {device}."
F_TOGGLE_OFF = "You turn off the {device}."
F_NO_DEVICE = "There is no device called {device}."
F_DEVICE_OPEN = "The {place} is open. Close it first."
F_WASHED = " Water washes the {obj} clean."
F_HEATED = " The {obj} heats up."
F_COOLED = " The {obj} cools down."
F_ALREADY_CLEAN = "The {obj} is already clean."
F_ALREADY_HOT = "The {obj} is already hot."
F_ALREADY_COLD = "The {obj} is already cold."
F_CLEAN_RECIPE = "To clean the {obj}, put it in the sink and turn on the faucet."
F_HEAT_RECIPE = "To heat the {obj}, put it in the microwave, close it, and turn it on."
F_COOL_RECIPE = "To cool the {obj}, put it in the fridge and close the door."
F_NO_CLEAN_AXIS = "The {obj} cannot be cleaned."
F_NO_TEMP_AXIS = "The {obj} cannot be heated or cooled."
F_NOOP = "Nothing happens."

# ---------------------------------------------------------------------------
# environment

@dataclass(frozen=True)
class StepResult:
    observation: str
    feedback: str
    done: bool
    reward: float
    ok: bool


class GridHouse:
    """One live episode: thin mutable wrapper over a cloned WorldState."""

    def __init__(self, task: TaskSpec, t_max: int | None = None) -> None:
        violations = validate_task(task)
        if violations:
            raise TaskValidationError(violations)
        self.task = task
        self.state = task.initial.clone()
        self.t_max = t_max if t_max is not None else task.t_max
        self.steps = 0
        self.done = False

    # -- goal bookkeeping -------------------------------------------------

    def _satisfied(self) -> int:
        return sum(1 for g in self.task.goal if g.satisfied(self.state))

    def goal_progress(self) -> float:
        return self._satisfied() / len(self.task.goal)

    def reward(self) -> float:
        return 1.0 if self._satisfied() == len(self.task.goal) else 0.0

    # -- visibility --------------------------------------------------------

    def _visible_here(self) -> list[ObjState]:
        here = self.state.agent_at
        fixture = FIXTURES[here]
        if fixture.openable and not self.state.fixture_open.get(here, False):
            return []
        return [o for o in self.state.objects.values() if o.place == here]

    def _accessible(self, name: str) -> bool:
        obj = self.state.objects.get(name)
        if obj is None:
            return False
        if obj.place == HELD:
            return True
        return any(o.name == name for o in self._visible_here())

    # -- rendering ----------------------------------------------------------

    @staticmethod
    def _render_object(obj: ObjState) -> str:
        attrs = []
        if obj.cleanliness is not None:
            attrs.append(obj.cleanliness)
        if obj.temperature in ("hot", "cold"):
            attrs.append(obj.temperature)
        if attrs:
            return f"{obj.name} [{', '.join(attrs)}]"
        return obj.name

    def _status_parts(self) -> list[str]:
        here = self.state.agent_at
        fixture = FIXTURES[here]
        parts = []
        if fixture.openable:
            word = "open" if self.state.fixture_open.get(here, False) else "closed"
            parts.append(f"The {here} is {word}.")
        if fixture.toggleable:
            on = self.state.fixture_on.get(here, False)
            if fixture.device == "faucet":
                parts.append("The faucet is running." if on else "The faucet is off.")
            else:
                parts.append(f"The {fixture.device} is {'on' if on else 'off'}.")
        return parts

    def valid_actions(self) -> list[str]:
        state = self.state
        here = state.agent_at
        fixture = FIXTURES[here]
        catalog: list[str] = []
        for loc in state.locations:
            if loc != here:
                catalog.append(f"goto({loc})")
        if fixture.openable:
            if state.fixture_open.get(here, False):
                catalog.append(f"close({here})")
            else:
                catalog.append(f"open({here})")
        if fixture.toggleable:
            catalog.append(f"toggle({fixture.device})")
        visible = self._visible_here()
        if state.holding is None:
            for obj in visible:
                catalog.append(f"pick({obj.name})")
        if state.holding is not None:
            if not fixture.openable or state.fixture_open.get(here, False):
                catalog.append(f"place({state.holding}, {here})")
        reachable = ([state.objects[state.holding]] if state.holding else []) + visible
        for obj in reachable:
            if obj.cleanliness is not None:
                catalog.append(f"clean({obj.name})")
            if obj.temperature is not None:
                catalog.append(f"heat({obj.name})")
                catalog.append(f"cool({obj.name})")
        catalog.append("noop")
        return catalog

    @property
    def observation(self) -> str:
        state = self.state
        parts = [f"You are at the {state.agent_at}."]
        if state.holding is not None:
            parts.append(f"Holding: {self._render_object(state.objects[state.holding])}.")
        else:
            parts.append("Your hands are empty.")
        parts.extend(self._status_parts())
        visible = self._visible_here()
        if visible:
            parts.append("You see: " + ", ".join(self._render_object(o) for o in visible) + ".")
        else:
            parts.append("You see nothing here.")
        parts.append("Valid actions: " + ", ".join(self.valid_actions()))
        return " | ".join(parts)

    def state_signature(self) -> str:
        return json.dumps(self.state.to_dict(), sort_keys=True)

    # -- recipes -------------------------------------------------------------

    def _contents(self, place: str) -> list[ObjState]:
        return [o for o in self.state.objects.values() if o.place == place]

    def _wash_contents(self, place: str) -> str:
        suffix = ""
        for obj in self._contents(place):
            if obj.cleanliness == "dirty":
                obj.cleanliness = "clean"
                suffix += F_WASHED.format(obj=obj.name)
        return suffix

    def _heat_contents(self, place: str) -> str:
        suffix = ""
        for obj in self._contents(place):
            if obj.temperature is not None and obj.temperature != "hot":
                obj.temperature = "hot"
                suffix += F_HEATED.format(obj=obj.name)
        return suffix

    def _cool_contents(self, place: str) -> str:
        suffix = ""
        for obj in self._contents(place):
            if obj.temperature is not None and obj.temperature != "cold":
                obj.temperature = "cold"
                suffix += F_COOLED.format(obj=obj.name)
        return suffix

    # -- transitions ----------------------------------------------------------

    def _apply(self, action: Action) -> tuple[bool, str]:
        state = self.state
        here = state.agent_at
        skill = action.skill

        if skill is Skill.NOOP:
            return True, F_NOOP

        if skill is Skill.GOTO:
            (place,) = action.args
            if place not in state.locations:
                return False, F_NO_PLACE.format(place=place)
            if place == here:
                return False, F_GOTO_SAME.format(place=place)
            state.agent_at = place
            return True, F_GOTO_OK.format(place=place)

        if skill is Skill.PICK:
            (name,) = action.args
            if name not in state.objects:
                return False, F_NO_OBJECT.format(obj=name)
            if state.holding is not None:
                return False, F_HANDS_FULL.format(held=state.holding)
            if not self._accessible(name) or state.objects[name].place == HELD:
                return False, F_NOT_HERE.format(obj=name)
            state.objects[name].place = HELD
            state.holding = name
            return True, F_PICK_OK.format(obj=name)

        if skill is Skill.PLACE:
            name, place = action.args
            if name not in state.objects:
                return False, F_NO_OBJECT.format(obj=name)
            if place not in state.locations:
                return False, F_NO_PLACE.format(place=place)
            if state.holding != name:
                return False, F_NOT_HOLDING.format(obj=name)
            if place != here:
                return False, F_NOT_AT.format(current=here, place=place)
            fixture = FIXTURES[place]
            if fixture.openable and not state.fixture_open.get(place, False):
                return False, F_CLOSED.format(place=place)
            state.objects[name].place = place
            state.holding = None
            feedback = F_PLACE_OK.format(obj=name, prep=fixture.preposition, place=place)
            if fixture.cleans and state.fixture_on.get(place, False):
                obj = state.objects[name]
                if obj.cleanliness == "dirty":
                    obj.cleanliness = "clean"
                    feedback += F_WASHED.format(obj=name)
            return True, feedback

        if skill is Skill.OPEN:
            (place,) = action.args
            if place not in state.locations:
                return False, F_NO_PLACE.format(place=place)
            if place != here:
                return False, F_NOT_AT.format(current=here, place=place)
            if not FIXTURES[place].openable:
                return False, F_NOT_OPENABLE.format(place=place)
            if state.fixture_open.get(place, False):
                return False, F_ALREADY_OPEN.format(place=place)
            state.fixture_open[place] = True
            if state.fixture_on.get(place, False):
                state.fixture_on[place] = False
                return True, F_OPEN_STOPS.format(place=place)
            return True, F_OPEN_OK.format(place=place)

        if skill is Skill.CLOSE:
            (place,) = action.args
            if place not in state.locations:
                return False, F_NO_PLACE.format(place=place)
            if place != here:
                return False, F_NOT_AT.format(current=here, place=place)
            if not FIXTURES[place].openable:
                return False, F_NOT_OPENABLE.format(place=place)
            if not state.fixture_open.get(place, False):
                return False, F_ALREADY_CLOSED.format(place=place)
            state.fixture_open[place] = False
            feedback = F_CLOSE_OK.format(place=place)
            if FIXTURES[place].cools:
                feedback += self._cool_contents(place)
            return True, feedback

        if skill is Skill.TOGGLE:
            (device,) = action.args
            place = _DEVICE_TO_FIXTURE.get(device)
            if place is None or place not in state.locations:
                return False, F_NO_DEVICE.format(device=device)
            if place != here:
                return False, F_NOT_AT.format(current=here, place=place)
            fixture = FIXTURES[place]
            turning_on = not state.fixture_on.get(place, False)
            if turning_on and fixture.openable and state.fixture_open.get(place, False):
                return False, F_DEVICE_OPEN.format(place=place)
            state.fixture_on[place] = turning_on
            if not turning_on:
                return True, F_TOGGLE_OFF.format(device=device)
            feedback = F_TOGGLE_ON.format(device=device)
            if fixture.cleans:
                feedback += self._wash_contents(place)
            if fixture.heats:
                feedback += self._heat_contents(place)
            return True, feedback

        # heat / cool / clean never transform state; the recipes above do.
        (name,) = action.args
        if name not in state.objects:
            return False, F_NO_OBJECT.format(obj=name)
        if not self._accessible(name):
            return False, F_NOT_HERE.format(obj=name)
        obj = state.objects[name]
        if skill is Skill.CLEAN:
            if obj.cleanliness is None:
                return False, F_NO_CLEAN_AXIS.format(obj=name)
            if obj.cleanliness == "clean":
                return True, F_ALREADY_CLEAN.format(obj=name)
            return False, F_CLEAN_RECIPE.format(obj=name)
        if obj.temperature is None:
            return False, F_NO_TEMP_AXIS.format(obj=name)
        if skill is Skill.HEAT:
            if obj.temperature == "hot":
                return True, F_ALREADY_HOT.format(obj=name)
            return False, F_HEAT_RECIPE.format(obj=name)
        if obj.temperature == "cold":
            return True, F_ALREADY_COLD.format(obj=name)
        return False, F_COOL_RECIPE.format(obj=name)

    def step(self, action: Action | str) -> StepResult:
        """Apply one action; invalid attempts are in-band feedback, never exceptions."""
        if self.done:
            raise RuntimeError("episode is done")
        if isinstance(action, str):
            parsed = parse_action(action)
            if parsed is None:
                raise ValueError(f"unparseable action text {action!r}")
            action = parsed
        ok, feedback = self._apply(action)
        self.steps += 1
        reward = self.reward()
        self.done = reward == 1.0 or self.steps >= self.t_max
        return StepResult(self.observation, feedback, self.done, reward, ok)


def reset(task: TaskSpec, t_max: int | None = None) -> tuple[GridHouse, str]:
    env = GridHouse(task, t_max=t_max)
    return env, env.observation


def replay(task: TaskSpec, actions: tuple[str, ...] | list[str], t_max: int | None = None) -> tuple[tuple[TrajectoryStep, ...], float]:
    """Run a fixed action sequence, returning the trajectory and final reward."""
    env, _ = reset(task, t_max=t_max)
    steps: list[TrajectoryStep] = []
    reward = 0.0
    for index, text in enumerate(actions):
        if env.done:
            break
        observation = env.observation
        result = env.step(text)
        steps.append(TrajectoryStep(index, observation, text, result.feedback))
        reward = result.reward
    return tuple(steps), reward


def oracle_trajectory(task: TaskSpec) -> tuple[TrajectoryStep, ...]:
    if not task.oracle:
        raise ValueError(f"task {task.id} carries no oracle")
    steps, _ = replay(task, task.oracle)
    return steps

# ---------------------------------------------------------------------------
# builtin task suites

_PLAIN = ("counter", "table", "shelf")

SPATIAL_PHRASES = {
    "counter": "the surface next to the sink",
    "table": "the surface by the window",
    "shelf": "the rack above the counter",
}


def _fetch_oracle(agent_at: str, obj: str, start: str, target: str) -> list[str]:
    oracle: list[str] = []
    if agent_at != start:
        oracle.append(f"goto({start})")
    oracle.append(f"pick({obj})")
    oracle.append(f"goto({target})")
    oracle.append(f"place({obj}, {target})")
    return oracle


def _move_task(task_id: str, category: Category, instruction: str, obj: str, start: str, target: str, seed: int) -> TaskSpec:
    world = standard_world(seed)
    world.objects[obj] = make_object(obj, start)
    return TaskSpec(
        id=task_id,
        instruction=instruction,
        category=category,
        initial=world,
        goal=(Subgoal(obj, "at", target),),
        oracle=tuple(_fetch_oracle(world.agent_at, obj, start, target)),
    )


def _base_tasks(rng: random.Random, seed: int) -> list[TaskSpec]:
    objs = ["plate", "mug", "bowl", "pan", "cup", "jar", "tin", "pot", "tray", "kettle"]
    rng.shuffle(objs)
    tasks = []
    for i, obj in enumerate(objs):
        target = _PLAIN[i % 3]
        start = [p for p in _PLAIN if p != target][i % 2]
        tasks.append(
            _move_task(
                f"base-{i + 1:02d}",
                Category.BASE,
                f"Put the {obj} on the {target}.",
                obj,
                start,
                target,
                seed,
            )
        )
    return tasks


def _complex_tasks(rng: random.Random, seed: int) -> list[TaskSpec]:
    objs = ["plate", "mug", "bowl", "pan", "cup", "jar", "tin", "pot", "tray", "kettle"]
    rng.shuffle(objs)
    phrasings = [
        "Could you make sure the {obj} ends up on the {target}?",
        "I need the {obj} over on the {target}.",
        "Please move the {obj} so it sits on the {target}.",
        "The {obj} belongs on the {target}; put it there.",
        "Take the {obj} and leave it on the {target}.",
    ]
    tasks = []
    for i, obj in enumerate(objs):
        target = _PLAIN[(i + 1) % 3]
        start = [p for p in _PLAIN if p != target][i % 2]
        instruction = phrasings[i % len(phrasings)].format(obj=obj, target=target)
        tasks.append(
            _move_task(
                f"complex_instruction-{i + 1:02d}",
                Category.COMPLEX_INSTRUCTION,
                instruction,
                obj,
                start,
                target,
                seed,
            )
        )
    return tasks


def _long_horizon_tasks(rng: random.Random, seed: int) -> list[TaskSpec]:
    dishes = ["plate", "mug", "bowl", "pan", "cup", "jar", "tin", "pot", "tray", "kettle"]
    items = ["candle", "toy", "box", "brush", "comb", "soap", "clip", "coin", "key", "card"]
    rng.shuffle(dishes)
    rng.shuffle(items)
    tasks = []
    for i, (dish, item) in enumerate(zip(dishes, items)):
        surface = ("table", "shelf")[i % 2]
        world = standard_world(seed)
        world.objects[dish] = make_object(dish, "counter", cleanliness="dirty")
        world.objects[item] = make_object(item, "table")
        oracle = [
            f"pick({dish})",
            "goto(sink)",
            f"place({dish}, sink)",
            "toggle(faucet)",
            f"pick({dish})",
            f"goto({surface})",
            f"place({dish}, {surface})",
        ]
        if surface != "table":
            oracle.append("goto(table)")
        oracle += [
            f"pick({item})",
            "goto(cabinet)",
            "open(cabinet)",
            f"place({item}, cabinet)",
        ]
        tasks.append(
            TaskSpec(
                id=f"long_horizon-{i + 1:02d}",
                instruction=(
                    f"Clean the {dish}, put it on the {surface}, "
                    f"and put the {item} in the cabinet."
                ),
                category=Category.LONG_HORIZON,
                initial=world,
                goal=(
                    Subgoal(dish, "attr", "clean"),
                    Subgoal(dish, "at", surface),
                    Subgoal(item, "at", "cabinet"),
                ),
                oracle=tuple(oracle),
            )
        )
    return tasks


def _common_sense_tasks(rng: random.Random, seed: int) -> list[TaskSpec]:
    foods = ["soup", "rice", "stew", "pie", "potato", "noodles", "porridge", "curry", "pasta", "beans"]
    rng.shuffle(foods)
    tasks = []
    for i, food in enumerate(foods):
        world = standard_world(seed)
        world.objects[food] = make_object(food, "counter")
        oracle = [
            f"pick({food})",
            "goto(microwave)",
            "open(microwave)",
            f"place({food}, microwave)",
            "close(microwave)",
            "toggle(microwave)",
            "open(microwave)",
            f"pick({food})",
            "goto(table)",
            f"place({food}, table)",
        ]
        tasks.append(
            TaskSpec(
                id=f"common_sense-{i + 1:02d}",
                # "serve" leaves the required hot state implicit
                instruction=f"Serve the {food}.",
                category=Category.COMMON_SENSE,
                initial=world,
                goal=(
                    Subgoal(food, "attr", "hot"),
                    Subgoal(food, "at", "table"),
                ),
                oracle=tuple(oracle),
            )
        )
    return tasks


def _spatial_tasks(rng: random.Random, seed: int) -> list[TaskSpec]:
    objs = ["spoon", "fork", "knife", "spatula", "board", "glass", "pitcher", "ladle", "whisk", "dish"]
    rng.shuffle(objs)
    tasks = []
    for i, obj in enumerate(objs):
        target = _PLAIN[i % 3]
        start = [p for p in _PLAIN if p != target][i % 2]
        tasks.append(
            _move_task(
                f"spatial-{i + 1:02d}",
                Category.SPATIAL,
                f"Put the {obj} on {SPATIAL_PHRASES[target]}.",
                obj,
                start,
                target,
                seed,
            )
        )
    return tasks


def _visual_tasks(rng: random.Random, seed: int) -> list[TaskSpec]:
    combos = [
        ("book", "red"), ("book", "blue"), ("book", "green"),
        ("ball", "red"), ("ball", "blue"), ("ball", "green"),
        ("cube", "red"), ("cube", "blue"), ("cube", "green"),
        ("towel", "white"),
    ]
    siblings = {
        "book": ("red", "blue", "green"),
        "ball": ("red", "blue", "green"),
        "cube": ("red", "blue", "green"),
        "towel": ("white", "gray"),
    }
    rng.shuffle(combos)
    tasks = []
    for i, (family, color) in enumerate(combos):
        target = _PLAIN[i % 3]
        start = [p for p in _PLAIN if p != target][i % 2]
        world = standard_world(seed)
        for sibling in siblings[family]:
            world.objects[f"{family}_{sibling}"] = make_object(f"{family}_{sibling}", start)
        obj = f"{family}_{color}"
        tasks.append(
            TaskSpec(
                id=f"visual_attribute-{i + 1:02d}",
                instruction=f"Put the {color} {family} on the {target}.",
                category=Category.VISUAL_ATTRIBUTE,
                initial=world,
                goal=(Subgoal(obj, "at", target),),
                oracle=tuple(_fetch_oracle(world.agent_at, obj, start, target)),
            )
        )
    return tasks


def builtin_suites(seed: int) -> list[TaskSpec]:
    """Sixty generated tasks, ten per category, each with a replay-checked oracle."""
    rng = random.Random(seed)
    tasks: list[TaskSpec] = []
    tasks += _base_tasks(rng, seed)
    tasks += _long_horizon_tasks(rng, seed)
    tasks += _complex_tasks(rng, seed)
    tasks += _common_sense_tasks(rng, seed)
    tasks += _spatial_tasks(rng, seed)
    tasks += _visual_tasks(rng, seed)

    instructions = [t.instruction for t in tasks]
    if len(set(instructions)) != len(instructions):
        raise AssertionError("builtin suite generated duplicate instructions")
    for task in tasks:
        violations = validate_task(task)
        if violations:
            raise AssertionError(f"builtin task {task.id} invalid: {violations}")
        _, reward = replay(task, task.oracle)
        if reward != 1.0:
            raise AssertionError(f"builtin oracle for {task.id} does not reach the goal")
    return tasks


def seen_unseen_split(tasks: list[TaskSpec]) -> tuple[list[TaskSpec], list[TaskSpec]]:
    """Within each category, the first half (by id) is seen, the rest unseen."""
    by_category: dict[Category, list[TaskSpec]] = {}
    for task in tasks:
        by_category.setdefault(task.category, []).append(task)
    seen: list[TaskSpec] = []
    unseen: list[TaskSpec] = []
    for category in by_category:
        group = sorted(by_category[category], key=lambda t: t.id)
        half = (len(group) + 1) // 2
        seen.extend(group[:half])
        unseen.extend(group[half:])
    return seen, unseen


def example_clean_plate_task() -> TaskSpec:
    """Start holding a dirty plate; goal: the plate clean and on the counter."""
    world = standard_world(0)
    world.objects["plate"] = make_object("plate", HELD, cleanliness="dirty")
    world.holding = "plate"
    return TaskSpec(
        id="example-clean-plate",
        instruction="Put a clean plate on the counter.",
        category=Category.BASE,
        initial=world,
        goal=(
            Subgoal("plate", "attr", "clean"),
            Subgoal("plate", "at", "counter"),
        ),
        oracle=(
            "goto(sink)",
            "place(plate, sink)",
            "toggle(faucet)",
            "pick(plate)",
            "goto(counter)",
            "place(plate, counter)",
        ),
    )

# ---------------------------------------------------------------------------
# task files

def save_task(task: TaskSpec, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(task.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_task(path: str | Path) -> TaskSpec:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    task = TaskSpec.from_dict(data)
    violations = validate_task(task)
    if violations:
        raise TaskValidationError(violations)
    return task


def export_suite(tasks: list[TaskSpec], directory: str | Path) -> list[Path]:
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    paths = []
    for task in tasks:
        path = target / f"{task.id}.json"
        save_task(task, path)
        paths.append(path)
    return paths


def import_suite(directory: str | Path) -> list[TaskSpec]:
    source = Path(directory)
    paths = sorted(source.glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"no task files in {source}")
    return [load_task(path) for path in paths]
