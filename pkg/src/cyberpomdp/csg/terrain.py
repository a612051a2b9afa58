"""Cyber terrain, mission, attacker script, sensors and defender actions, plus the document loader."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import jsonschema

from ..errors import DanglingReference, SchemaError


class Effect(str, Enum):
    DEGRADATION = "Degradation"
    INTERRUPTION = "Interruption"
    MODIFICATION = "Modification"
    FABRICATION = "Fabrication"
    UNAUTHORIZED_USE = "UnauthorizedUse"
    INTERCEPTION = "Interception"


EFFECT_NAMES = tuple(e.value for e in Effect)

ASSET_KINDS = ("Host", "Service", "FileShare", "DataFile", "Credential", "UserGroup", "NetworkLink")

# edge kind -> (source kind, target kind)
EDGE_KINDS = {
    "host-on-network": ("Host", "NetworkLink"),
    "credential-grants-access-to-host": ("Credential", "Host"),
    "share-served-by-host": ("FileShare", "Host"),
    "file-stored-on-share": ("DataFile", "FileShare"),
    "group-holds-credential": ("UserGroup", "Credential"),
}

# incident category each attacker step produces
STEP_CATEGORY = {
    "StealCredential": Effect.INTERCEPTION,
    "LateralMove": Effect.UNAUTHORIZED_USE,
}


@dataclass(frozen=True)
class Asset:
    asset_id: str
    kind: str
    label: str = ""


@dataclass(frozen=True)
class Edge:
    kind: str
    src: str
    dst: str


@dataclass(frozen=True)
class Terrain:
    assets: tuple[Asset, ...]
    edges: tuple[Edge, ...]
    foothold: str

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {a.asset_id: a for a in self.assets})

    def asset(self, asset_id: str) -> Asset:
        return self._by_id[asset_id]

    def kind(self, asset_id: str) -> str:
        return self._by_id[asset_id].kind

    def has(self, asset_id: str) -> bool:
        return asset_id in self._by_id

    def related(self, kind: str, src: str | None = None, dst: str | None = None) -> list[str]:
        if src is not None:
            return [e.dst for e in self.edges if e.kind == kind and e.src == src]
        return [e.src for e in self.edges if e.kind == kind and e.dst == dst]

    def home_host(self, asset_id: str) -> str | None:
        """Host an attacker must occupy to act on the asset (None: any foothold will do)."""
        kind = self.kind(asset_id)
        if kind == "Host":
            return asset_id
        if kind == "FileShare":
            hosts = self.related("share-served-by-host", src=asset_id)
            return hosts[0] if hosts else None
        if kind == "DataFile":
            shares = self.related("file-stored-on-share", src=asset_id)
            return self.home_host(shares[0]) if shares else None
        return None

    def hosted_on(self, host: str) -> list[str]:
        """Shares served by the host and the files stored on them."""
        out = []
        for share in self.related("share-served-by-host", dst=host):
            out.append(share)
            out.extend(self.related("file-stored-on-share", dst=share))
        return out

    def grants_access(self, credential: str, host: str) -> bool:
        return host in self.related("credential-grants-access-to-host", src=credential)


@dataclass(frozen=True)
class Activity:
    name: str
    required_assets: tuple[str, ...]
    per_step_value: float
    disabling_effects: frozenset[str]
    outputs: tuple[str, ...] = ()


@dataclass(frozen=True)
class Mission:
    activities: tuple[Activity, ...]
    impact_penalty: float = -800.0
    terminal_effects: tuple[tuple[str, str], ...] = ()

    @property
    def full_value(self) -> float:
        return sum(a.per_step_value for a in self.activities)


@dataclass(frozen=True)
class ScriptStep:
    op: str                     # StealCredential | LateralMove | ApplyEffect
    host: str | None = None
    credential: str | None = None
    target: str | None = None
    effect: str | None = None
    asset: str | None = None
    level: float = 1.0

    @property
    def category(self) -> Effect:
        """DIMFUI category of the incident this step creates."""
        if self.op == "ApplyEffect":
            return Effect(self.effect)
        return STEP_CATEGORY[self.op]

    def incident(self) -> tuple[str, str, float]:
        if self.op == "StealCredential":
            return (self.credential, Effect.INTERCEPTION.value, 1.0)
        if self.op == "LateralMove":
            return (self.target, Effect.UNAUTHORIZED_USE.value, 1.0)
        level = self.level if self.effect == Effect.DEGRADATION.value else 1.0
        return (self.asset, self.effect, level)


@dataclass(frozen=True)
class AttackerScript:
    steps: tuple[ScriptStep, ...]
    persistent: bool = True
    idle_prob: float = 0.0
    success_prob: float = 1.0
    present_prob: float = 1.0


@dataclass(frozen=True)
class Sensor:
    asset: str
    effect: str
    fpr: float = 0.0
    fnr: float = 0.0

    @property
    def name(self) -> str:
        return f"{self.asset}:{self.effect}"


@dataclass(frozen=True)
class DefenderAction:
    kind: str                   # NOP | RestoreHost | DisableAccount
    target: str | None = None
    cost: float = 0.0

    @property
    def name(self) -> str:
        if self.kind == "NOP":
            return "NOP"
        short = "RX" if self.kind == "RestoreHost" else "DA"
        return f"{short}({self.target})"


@dataclass(frozen=True)
class CsgConfig:
    terrain: Terrain
    mission: Mission
    attacker: AttackerScript | None
    sensors: tuple[Sensor, ...]
    actions: tuple[DefenderAction, ...]
    max_steps: int = 100
    discount: float = 0.95
    extra: dict = field(default_factory=dict, compare=False, hash=False)


# ---------------------------------------------------------------------------
# Loader

_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_ID = {"type": "string", "minLength": 1}
_EFFECT = {"enum": list(EFFECT_NAMES)}

TERRAIN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["assets", "foothold", "mission", "actions"],
    "properties": {
        "assets": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "additionalProperties": False, "required": ["id", "kind"],
                "properties": {"id": _ID, "kind": {"enum": list(ASSET_KINDS)},
                               "label": {"type": "string"}},
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object", "additionalProperties": False,
                "required": ["kind", "from", "to"],
                "properties": {"kind": {"enum": list(EDGE_KINDS)}, "from": _ID, "to": _ID},
            },
        },
        "foothold": _ID,
        "mission": {
            "type": "object", "additionalProperties": False, "required": ["activities"],
            "properties": {
                "activities": {
                    "type": "array",
                    "items": {
                        "type": "object", "additionalProperties": False,
                        "required": ["name", "requiredAssets", "perStepValue"],
                        "properties": {
                            "name": _ID,
                            "requiredAssets": {"type": "array", "items": _ID},
                            "outputs": {"type": "array", "items": _ID},
                            "perStepValue": {"type": "number", "minimum": 0},
                            "disablingEffects": {"type": "array", "items": _EFFECT},
                        },
                    },
                },
                "impactPenalty": {"type": "number", "maximum": 0},
                "terminalEffects": {
                    "type": "array",
                    "items": {
                        "type": "object", "additionalProperties": False,
                        "required": ["asset", "effect"],
                        "properties": {"asset": _ID, "effect": _EFFECT},
                    },
                },
            },
        },
        "attacker": {
            "type": ["object", "null"], "additionalProperties": False, "required": ["script"],
            "properties": {
                "persistent": {"type": "boolean"},
                "idleProb": _PROB,
                "successProb": _PROB,
                "presentProb": _PROB,
                "script": {
                    "type": "array",
                    "items": {
                        "type": "object", "additionalProperties": False, "required": ["op"],
                        "properties": {
                            "op": {"enum": ["StealCredential", "LateralMove", "ApplyEffect"]},
                            "host": _ID, "credential": _ID, "target": _ID,
                            "effect": _EFFECT, "asset": _ID,
                            "level": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        },
                    },
                },
            },
        },
        "sensors": {
            "type": "array",
            "items": {
                "type": "object", "additionalProperties": False, "required": ["asset", "effect"],
                "properties": {"asset": _ID, "effect": _EFFECT, "fpr": _PROB, "fnr": _PROB},
            },
        },
        "actions": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "additionalProperties": False, "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["NOP", "RestoreHost", "DisableAccount"]},
                    "host": _ID, "credential": _ID,
                    "cost": {"type": "number", "maximum": 0},
                },
            },
        },
        "maxSteps": {"type": "integer", "minimum": 1},
        "discount": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
}

_STEP_FIELDS = {
    "StealCredential": ("host", "credential"),
    "LateralMove": ("credential", "target"),
    "ApplyEffect": ("effect", "asset"),
}


def _validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, TERRAIN_SCHEMA)
    except jsonschema.ValidationError as err:
        path = "/domainParams/" + "/".join(str(p) for p in err.absolute_path)
        raise SchemaError(path.rstrip("/"), err.message) from None


def load_terrain(doc: dict) -> CsgConfig:
    """Validate a terrain document and resolve every reference."""
    _validate(doc)
    assets = []
    seen = set()
    for i, a in enumerate(doc["assets"]):
        if a["id"] in seen:
            raise SchemaError(f"/domainParams/assets/{i}/id", f"duplicate asset id {a['id']!r}")
        seen.add(a["id"])
        assets.append(Asset(a["id"], a["kind"], a.get("label", "")))
    kinds = {a.asset_id: a.kind for a in assets}

    def ref(path: str, asset_id: str, *allowed: str) -> str:
        if asset_id not in kinds:
            raise DanglingReference(path, asset_id)
        if allowed and kinds[asset_id] not in allowed:
            raise SchemaError(path, f"{asset_id!r} is a {kinds[asset_id]}, expected {'/'.join(allowed)}")
        return asset_id

    edges = []
    for i, e in enumerate(doc.get("edges", [])):
        src_kind, dst_kind = EDGE_KINDS[e["kind"]]
        edges.append(Edge(e["kind"], ref(f"/domainParams/edges/{i}/from", e["from"], src_kind),
                          ref(f"/domainParams/edges/{i}/to", e["to"], dst_kind)))
    foothold = ref("/domainParams/foothold", doc["foothold"], "Host")
    terrain = Terrain(tuple(assets), tuple(edges), foothold)

    m = doc["mission"]
    activities = []
    for i, act in enumerate(m["activities"]):
        base = f"/domainParams/mission/activities/{i}"
        req = tuple(ref(f"{base}/requiredAssets", x) for x in act["requiredAssets"])
        outs = tuple(ref(f"{base}/outputs", x) for x in act.get("outputs", []))
        activities.append(Activity(act["name"], req, float(act["perStepValue"]),
                                   frozenset(act.get("disablingEffects", ["Interruption", "Modification"])),
                                   outs))
    terminal = tuple(
        (ref(f"/domainParams/mission/terminalEffects/{i}/asset", t["asset"]), t["effect"])
        for i, t in enumerate(m.get("terminalEffects", []))
    )
    mission = Mission(tuple(activities), float(m.get("impactPenalty", -800.0)), terminal)

    attacker = None
    if doc.get("attacker"):
        a = doc["attacker"]
        steps = []
        for i, s in enumerate(a["script"]):
            base = f"/domainParams/attacker/script/{i}"
            for name in _STEP_FIELDS[s["op"]]:
                if name not in s:
                    raise SchemaError(base, f"{s['op']} needs {name!r}")
            if s["op"] == "StealCredential":
                host = ref(f"{base}/host", s["host"], "Host")
                cred = ref(f"{base}/credential", s["credential"], "Credential")
                if not terrain.grants_access(cred, host):
                    raise SchemaError(base, f"{cred!r} is not used on {host!r}")
                steps.append(ScriptStep("StealCredential", host=host, credential=cred))
            elif s["op"] == "LateralMove":
                cred = ref(f"{base}/credential", s["credential"], "Credential")
                target = ref(f"{base}/target", s["target"], "Host")
                if not terrain.grants_access(cred, target):
                    raise SchemaError(base, f"{cred!r} grants no access to {target!r}")
                steps.append(ScriptStep("LateralMove", credential=cred, target=target))
            else:
                steps.append(ScriptStep("ApplyEffect", effect=s["effect"],
                                        asset=ref(f"{base}/asset", s["asset"]),
                                        level=float(s.get("level", 1.0))))
        attacker = AttackerScript(tuple(steps), bool(a.get("persistent", True)),
                                  float(a.get("idleProb", 0.0)), float(a.get("successProb", 1.0)),
                                  float(a.get("presentProb", 1.0)))

    sensors = tuple(
        Sensor(ref(f"/domainParams/sensors/{i}/asset", s["asset"]), s["effect"],
               float(s.get("fpr", 0.0)), float(s.get("fnr", 0.0)))
        for i, s in enumerate(doc.get("sensors", []))
    )
    actions = []
    for i, act in enumerate(doc["actions"]):
        base = f"/domainParams/actions/{i}"
        if act["kind"] == "NOP":
            actions.append(DefenderAction("NOP"))
        elif act["kind"] == "RestoreHost":
            if "host" not in act:
                raise SchemaError(base, "RestoreHost needs 'host'")
            actions.append(DefenderAction("RestoreHost", ref(f"{base}/host", act["host"], "Host"),
                                          float(act.get("cost", -30.0))))
        else:
            if "credential" not in act:
                raise SchemaError(base, "DisableAccount needs 'credential'")
            actions.append(DefenderAction(
                "DisableAccount", ref(f"{base}/credential", act["credential"], "Credential"),
                float(act.get("cost", -20.0))))
    if actions[0].kind != "NOP":
        raise SchemaError("/domainParams/actions/0", "the first defender action must be NOP")
    names = [a.name for a in actions]
    if len(set(names)) != len(names):
        raise SchemaError("/domainParams/actions", "duplicate defender actions")
    return CsgConfig(terrain, mission, attacker, sensors, tuple(actions),
                     int(doc.get("maxSteps", 100)), float(doc.get("discount", 0.95)))
