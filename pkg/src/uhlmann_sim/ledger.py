"""Resource accounting: queries, samples and channel uses against formulas."""

from __future__ import annotations

from collections import defaultdict


class ResourceLedger:
    """Counters for one experiment run.

    Counters only ever grow. ``bounds`` holds the closed-form value a counter
    is expected to match (or stay below); :meth:`check` compares them.
    """

    def __init__(self, name="run"):
        self.name = name
        self.queries = defaultdict(int)   # (oracle, direction) -> count
        self.samples = defaultdict(int)   # state name -> count
        self.channel_uses = defaultdict(int)
        self.bounds = {}                  # counter key -> formula value
        self.params = {}                  # branch parameters (u, m, beta, ...)
        self.notes = []

    # -- counters
    def add_query(self, oracle, direction="forward", count=1):
        if count < 0:
            raise ValueError("counts are nonnegative")
        self.queries[(oracle, direction)] += int(count)

    def add_samples(self, state, count):
        if count < 0:
            raise ValueError("counts are nonnegative")
        self.samples[state] += int(count)

    def add_channel_uses(self, channel, count):
        if count < 0:
            raise ValueError("counts are nonnegative")
        self.channel_uses[channel] += int(count)

    def total_queries(self, oracle=None):
        return sum(v for (o, _), v in self.queries.items() if oracle is None or o == oracle)

    # -- formulas and parameters
    def set_param(self, key, value):
        self.params[key] = value

    def set_bound(self, key, value):
        self.bounds[key] = value

    def note(self, text):
        if text not in self.notes:
            self.notes.append(text)

    def counter(self, key):
        kind, _, name = key.partition(":")
        if kind == "samples":
            return self.samples.get(name, 0)
        if kind == "channel":
            return self.channel_uses.get(name, 0)
        if kind == "queries":
            return self.total_queries(name or None)
        raise KeyError(key)

    def check(self, slack=1.0):
        """Every bounded counter is at most ``slack`` times its formula."""
        bad = {}
        for key, bound in self.bounds.items():
            try:
                val = self.counter(key)
            except KeyError:
                continue
            # exact integer comparison when there is no slack; counts get huge
            if (val > bound) if slack == 1 else (val > slack * bound):
                bad[key] = (val, bound)
        return bad

    def merge(self, other, prefix=""):
        for k, v in other.queries.items():
            self.queries[(prefix + k[0], k[1])] += v
        for k, v in other.samples.items():
            self.samples[prefix + k] += v
        for k, v in other.channel_uses.items():
            self.channel_uses[prefix + k] += v
        for k, v in other.params.items():
            self.params[prefix + k] = v
        for k, v in other.bounds.items():
            self.bounds[prefix + k] = v
        for n in other.notes:
            self.note(n)

    def to_dict(self):
        return {
            "queries": {f"{o}/{d}": v for (o, d), v in sorted(self.queries.items())},
            "samples": dict(sorted(self.samples.items())),
            "channel_uses": dict(sorted(self.channel_uses.items())),
            "params": dict(self.params),
            "bounds": dict(self.bounds),
            "notes": list(self.notes),
        }
