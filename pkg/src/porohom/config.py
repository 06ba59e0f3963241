"""Plain-text run configuration: `key = value` lines, `#` comments and the
sections [experiment], [grid], [material].  Validation collects every
violation (with line numbers) instead of stopping at the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .microsim import MaterialParams

__all__ = ["RunConfig", "ConfigError", "parse_config", "EXPERIMENTS", "DEFAULTS"]

EXPERIMENTS = (
    "mollifier-props",
    "poincare-scaling",
    "extension-bounds",
    "micro-sim",
    "cell-problems",
    "eps-convergence",
)

# (section, key) -> (default, parser)
def _floats(s):
    return tuple(float(t) for t in s.split(",") if t.strip())


DEFAULTS = {
    ("experiment", "name"): (None, str),
    ("experiment", "out_dir"): ("runs", str),
    ("experiment", "seed"): (0, int),
    ("experiment", "steps"): (10, int),
    ("experiment", "eps_list"): ((1.0, 0.5, 0.25), _floats),
    ("experiment", "h_list"): ((0.2, 0.1, 0.05), _floats),
    ("experiment", "interface_plane"): (0.0, float),
    ("grid", "dim"): (2, int),
    ("grid", "n"): (33, int),
    ("grid", "pattern"): ("disk", str),
    ("grid", "r0"): (0.25, float),
    ("material", "mu1"): (1.0, float),
    ("material", "mu2"): (1.0, float),
    ("material", "lambda"): (1.0, float),
    ("material", "c_f1"): (1.0, float),
    ("material", "c_f2"): (1.0, float),
    ("material", "c_s"): (1.0, float),
    ("material", "p0"): (0.0, float),
    ("material", "p_grad"): (1.0, float),
    ("material", "epsilon"): (0.5, float),
    ("material", "h_mollify"): (0.1, float),
    ("material", "tau"): (0.05, float),
    ("material", "t_final"): (1.0, float),
}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(self.problems))


@dataclass
class RunConfig:
    experiment: str
    out_dir: str
    seed: int
    steps: int
    eps_list: tuple
    h_list: tuple
    interface_plane: float
    dim: int
    n: int
    pattern_kind: str
    r0: float
    material: MaterialParams
    raw: dict = field(default_factory=dict)


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError listing every violation."""
    problems = []
    seen = {}  # (section, key) -> line number
    values = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("experiment", "grid", "material"):
                problems.append(f"line {lineno}: unknown section [{section}]")
                section = None
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected `key = value`, got {line!r}")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if section is None:
            problems.append(f"line {lineno}: key {key!r} outside any section")
            continue
        slot = (section, key)
        if slot not in DEFAULTS:
            problems.append(f"line {lineno}: unknown key {key!r} in section [{section}]")
            continue
        if slot in seen:
            problems.append(
                f"line {lineno}: duplicate key {key!r} (first set on line {seen[slot]})")
            continue
        seen[slot] = lineno
        _, conv = DEFAULTS[slot]
        try:
            values[slot] = conv(val)
        except ValueError:
            problems.append(f"line {lineno}: cannot parse value {val!r} for key {key!r}")

    def get(section, key):
        slot = (section, key)
        return values.get(slot, DEFAULTS[slot][0])

    name = get("experiment", "name")
    if name is None:
        problems.append("missing required key `name` in [experiment]")
    elif name not in EXPERIMENTS:
        problems.append(f"unknown experiment {name!r}; registry: {', '.join(EXPERIMENTS)}")

    dim = get("grid", "dim")
    if dim not in (2, 3):
        problems.append(f"grid dim must be 2 or 3, got {dim}")
    n = get("grid", "n")
    if n < 3:
        problems.append(f"grid n must be >= 3, got {n}")
    r0 = get("grid", "r0")
    if not 0.0 <= r0 < 0.5:
        problems.append(f"r0 must lie in [0, 1/2), got {r0}")
    pattern = get("grid", "pattern")
    if pattern not in ("disk", "sphere", "square-block", "full-solid", "none"):
        problems.append(f"unknown pattern {pattern!r}")

    for key in ("mu1", "mu2", "lambda", "c_f1", "c_f2", "c_s", "tau"):
        v = get("material", key)
        if v <= 0:
            problems.append(f"material {key} must be positive, got {v}")
    eps = get("material", "epsilon")
    if eps <= 0 or abs(1.0 / eps - round(1.0 / eps)) > 1e-9:
        problems.append(f"epsilon must be an integer reciprocal, got {eps}")
    for e in get("experiment", "eps_list"):
        if e <= 0 or abs(1.0 / e - round(1.0 / e)) > 1e-9:
            problems.append(f"eps_list entry {e} is not an integer reciprocal")
    h_list = get("experiment", "h_list")
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        problems.append(f"h_list must be strictly decreasing, got {h_list}")
    plane = get("experiment", "interface_plane")
    if not -0.5 < plane < 0.5:
        problems.append(f"interface_plane must lie in (-1/2, 1/2), got {plane}")

    if problems:
        raise ConfigError(problems)

    ndim = dim
    material = MaterialParams(
        mu1=get("material", "mu1"),
        mu2=get("material", "mu2"),
        lam=get("material", "lambda"),
        c_f1=get("material", "c_f1"),
        c_f2=get("material", "c_f2"),
        c_s=get("material", "c_s"),
        p0=get("material", "p0"),
        p_drive_grad=(get("material", "p_grad"),) + (0.0,) * (ndim - 1),
        epsilon=eps,
        h_mollify=get("material", "h_mollify"),
        tau=get("material", "tau"),
        t_final=get("material", "t_final"),
    )
    return RunConfig(
        experiment=name,
        out_dir=get("experiment", "out_dir"),
        seed=get("experiment", "seed"),
        steps=get("experiment", "steps"),
        eps_list=tuple(get("experiment", "eps_list")),
        h_list=tuple(h_list),
        interface_plane=plane,
        dim=dim,
        n=n,
        pattern_kind=pattern,
        r0=r0,
        material=material,
        raw={f"{s}.{k}": v for (s, k), v in values.items()},
    )
