"""Environment spec strings.

Grammar (fields separated by ``:``, options in any order after the name)::

    nchain[:N=<int>][:maxsteps=<int>][:forward_first][:stochastic=<p>]
    crossing:<W>x<H>[:lava|:simple][:nonterminal][:stochastic=<p>]
            [:maxsteps=<int>][:rivers=<int>][:layout=<seed>]
    sixstate[:stochastic=<p>]

``crossing`` defaults to the lava variant with one river.
"""

from __future__ import annotations

import re

import numpy as np

from ter.envs.base import Env
from ter.envs.grid import GridEnv
from ter.envs.nchain import NChainEnv
from ter.envs.toy import six_state_mdp
from ter.envs.wrappers import StochasticWrapper

_SIZE = re.compile(r"^(\d+)x(\d+)$")


class EnvSpecError(ValueError):
    pass


def parse_env_spec(spec: str) -> tuple[str, dict]:
    """Split a spec string into ``(name, options)`` with typed option values."""
    parts = [p.strip() for p in spec.strip().split(":")]
    name, rest = parts[0].lower(), parts[1:]
    opts: dict = {}
    for p in rest:
        key, eq, val = p.partition("=")
        key = key.lower()
        try:
            if name == "crossing" and _SIZE.match(key):
                w, h = _SIZE.match(key).groups()
                opts["width"], opts["height"] = int(w), int(h)
            elif key in ("lava", "simple") and not eq:
                opts["variant"] = key
            elif key in ("nonterminal", "forward_first") and not eq:
                opts[key] = True
            elif key == "stochastic" and eq:
                opts["stochastic"] = float(val)
            elif key in ("n", "maxsteps", "rivers", "layout") and eq:
                opts[key] = int(val)
            else:
                raise EnvSpecError(f"unrecognised field {p!r} in env spec {spec!r}")
        except ValueError as exc:
            if isinstance(exc, EnvSpecError):
                raise
            raise EnvSpecError(f"bad value in field {p!r} of env spec {spec!r}") from exc
    allowed = {
        "nchain": {"n", "maxsteps", "forward_first", "stochastic"},
        "crossing": {"width", "height", "variant", "nonterminal", "stochastic", "maxsteps",
                     "rivers", "layout"},
        "sixstate": {"stochastic"},
    }
    if name not in allowed:
        raise EnvSpecError(f"unknown environment {name!r}")
    extra = set(opts) - allowed[name]
    if extra:
        raise EnvSpecError(f"options {sorted(extra)} do not apply to {name}")
    if name == "crossing" and "width" not in opts:
        raise EnvSpecError("crossing spec needs a <W>x<H> size field")
    return name, opts


def make_env(spec: str, rng: np.random.Generator | None = None) -> Env:
    """Build the environment for ``spec``; ``rng`` drives action corruption only."""
    name, o = parse_env_spec(spec)
    if name == "nchain":
        env: Env = NChainEnv(o.get("n", 20), o.get("maxsteps"), o.get("forward_first", False))
    elif name == "crossing":
        env = GridEnv(o["width"], o["height"], o.get("variant", "lava"), o.get("rivers", 1),
                      o.get("maxsteps"), o.get("nonterminal", False), o.get("layout"))
    else:
        env = six_state_mdp()
    if "stochastic" in o:
        env = StochasticWrapper(env, o["stochastic"], rng)
    return env
