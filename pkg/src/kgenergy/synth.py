"""Synthetic industrial-automation knowledge graph with labelled test events.

The baseline mimics a small OT/IT plant. Developer hosts talk to a historian,
an app repository and a few internet hosts, and push the apps they maintain.
Edge computers pull and host apps that read process variables from a PLC,
while the historian polls the PLC and reads every variable.
Activity is stochastic: every tick each recurring behaviour fires with its own
rate, so frequent behaviour appears many times in the triple list.

Test events are novel triples graded by how far they stray from the
baseline:

* observed - already present in the baseline;
* expected - a device does what a sibling of the same class did;
* unexpected - a developer host does something odd but harmless: pulling an
  app, SSH into the historian, OPC UA towards the PLC;
* suspicious - edge computers or the historian touching developer-only
  services, pushing apps, or opening connections to developer hosts;
* highly suspicious - edge devices reaching the internet or being the target
  of SSH, and the PLC talking to anything outside the plant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LabeledEvent, SeverityClass, TripleStore, Vocabulary, build_vocabulary, encode


@dataclass(frozen=True)
class SynthConfig:
    n_dev_hosts: int = 4
    n_edge: int = 4
    n_apps: int = 6
    n_internet: int = 8
    n_variables: int = 24
    internet_per_dev: int = 4
    variables_per_app: int = 5
    ticks: int = 150
    # per-tick firing probabilities of recurring behaviours
    rate_dev_historian: float = 0.6
    rate_dev_repo: float = 0.4
    rate_dev_ssh: float = 0.3
    rate_dev_push: float = 0.1
    rate_dev_internet: float = 0.08
    rate_dns: float = 0.3
    rate_edge_repo: float = 0.4
    rate_edge_pull: float = 0.15
    rate_edge_plc: float = 0.6
    rate_app_read: float = 0.25
    rate_historian_plc: float = 0.6
    rate_historian_read: float = 0.08
    # events requested per class (fewer if the candidate pool is smaller)
    n_observed: int = 40
    n_expected: int = 40
    n_unexpected: int = 40
    n_suspicious: int = 40
    n_highly_suspicious: int = 40


STATIC_RELATIONS = ("is_a", "hosts", "provides", "maintains")


def _names(prefix, n):
    return [f"{prefix}_{i + 1}" for i in range(n)]


class _Plant:
    def __init__(self, cfg: SynthConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.devs = _names("dev_host", cfg.n_dev_hosts)
        self.edges = _names("edge", cfg.n_edge)
        self.apps = _names("app", cfg.n_apps)
        self.inet = _names("internet_host", cfg.n_internet)
        self.vars = _names("variable", cfg.n_variables)
        # dev host -> subset of internet hosts it visits (every host visited by someone)
        self.dev_inet = {d: set() for d in self.devs}
        order = list(rng.permutation(len(self.inet)))
        for i, j in enumerate(order):
            self.dev_inet[self.devs[i % len(self.devs)]].add(self.inet[j])
        for d in self.devs:
            while len(self.dev_inet[d]) < min(cfg.internet_per_dev, len(self.inet)):
                self.dev_inet[d].add(self.inet[int(rng.integers(len(self.inet)))])
        # app -> hosting edge (round robin), dev host responsible for pushing it
        self.app_edge = {a: self.edges[i % len(self.edges)] for i, a in enumerate(self.apps)}
        self.app_devs = {a: {self.devs[i % len(self.devs)], self.devs[(i + 1) % len(self.devs)]}
                         for i, a in enumerate(self.apps)}
        # app -> variables it reads (drawn from the first three quarters)
        n_app_vars = max(1, (3 * cfg.n_variables) // 4)
        self.app_vars = {a: set(rng.choice(n_app_vars, size=min(cfg.variables_per_app, n_app_vars),
                                           replace=False).tolist()) for a in self.apps}
        self.app_vars = {a: {self.vars[v] for v in vs} for a, vs in self.app_vars.items()}

    def static(self):
        out = []
        for d in self.devs:
            out.append((d, "is_a", "DevHost"))
        for e in self.edges:
            out.append((e, "is_a", "EdgeComputer"))
        for a in self.apps:
            out.append((a, "is_a", "App"))
            out.append((self.app_edge[a], "hosts", a))
            for d in sorted(self.app_devs[a]):
                out.append((d, "maintains", a))
        for h in self.inet:
            out.append((h, "is_a", "InternetHost"))
        for v in self.vars:
            out.append(("plc", "provides", v))
        out += [("historian", "is_a", "Server"), ("app_repo", "is_a", "Server"),
                ("dns_server", "is_a", "Server"), ("plc", "is_a", "Controller")]
        return out

    def recurring(self):
        """``(triple, rate)`` for every stochastic behaviour."""
        c = self.cfg
        acts = []
        for d in self.devs:
            acts += [((d, "https_to", "historian"), c.rate_dev_historian),
                     ((d, "https_to", "app_repo"), c.rate_dev_repo),
                     ((d, "ssh_to", "app_repo"), c.rate_dev_ssh),
                     ((d, "dns_to", "dns_server"), c.rate_dns)]
            acts += [((d, "https_to", h), c.rate_dev_internet) for h in sorted(self.dev_inet[d])]
        for a in self.apps:
            acts += [((d, "pushes", a), c.rate_dev_push) for d in sorted(self.app_devs[a])]
            acts.append(((self.app_edge[a], "pulls", a), c.rate_edge_pull))
            acts += [((a, "reads", v), c.rate_app_read) for v in sorted(self.app_vars[a])]
        for e in self.edges:
            acts += [((e, "https_to", "app_repo"), c.rate_edge_repo),
                     ((e, "opcua_to", "plc"), c.rate_edge_plc),
                     ((e, "dns_to", "dns_server"), c.rate_dns)]
        acts.append((("historian", "opcua_to", "plc"), c.rate_historian_plc))
        acts += [(("historian", "reads", v), c.rate_historian_read) for v in self.vars]
        return acts

    def candidates(self):
        """Novel-event templates per severity class (filtered against the baseline later)."""
        S = SeverityClass
        cand = {cls: [] for cls in S}
        for d in self.devs:
            for d2 in self.devs:
                if d2 != d:
                    cand[S.EXPECTED] += [(d, "https_to", h) for h in sorted(self.dev_inet[d2])]
            cand[S.EXPECTED] += [(d, "pushes", a) for a in self.apps]
            cand[S.UNEXPECTED] += [(d, "ssh_to", "historian"), (d, "opcua_to", "plc")]
            cand[S.UNEXPECTED] += [(d, "pulls", a) for a in self.apps]
        for a in self.apps:
            cand[S.EXPECTED] += [(e, "pulls", a) for e in self.edges]
        cand[S.SUSPICIOUS] += [("historian", "https_to", "app_repo"), ("historian", "ssh_to", "app_repo")]
        for e in self.edges:
            cand[S.SUSPICIOUS] += [(e, "https_to", "historian"), (e, "ssh_to", "app_repo"),
                                   (e, "ssh_to", "historian")]
            cand[S.SUSPICIOUS] += [(e, "pushes", a) for a in self.apps]
            cand[S.SUSPICIOUS] += [(e, "https_to", d) for d in self.devs]
            cand[S.HIGHLY_SUSPICIOUS] += [(e, "https_to", h) for h in self.inet]
            cand[S.HIGHLY_SUSPICIOUS] += [(x, "ssh_to", e) for x in self.devs + self.edges if x != e]
        cand[S.HIGHLY_SUSPICIOUS] += [("plc", "https_to", h) for h in self.inet]
        cand[S.HIGHLY_SUSPICIOUS] += [("plc", "ssh_to", x) for x in self.edges + self.devs]
        return cand


def synth_industrial_graph(cfg: SynthConfig | None = None, seed: int = 0):
    """Generate ``(baseline, events, vocab)``.

    ``baseline`` is a :class:`TripleStore` with repeated stochastic triples,
    ``events`` a list of :class:`LabeledEvent` over the same vocabulary.
    """
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(seed)
    plant = _Plant(cfg, rng)
    static = plant.static()
    acts = plant.recurring()
    rates = np.array([r for _, r in acts])
    names = list(static)
    for _ in range(cfg.ticks):
        fired = np.flatnonzero(rng.random(len(acts)) < rates)
        names += [acts[i][0] for i in fired]
    # every behaviour shows up at least once so the vocabulary is complete
    seen = set(names)
    names += [t for t, _ in acts if t not in seen]

    cand = plant.candidates()
    # every candidate symbol must be known to the baseline vocabulary
    vocab = build_vocabulary(names)
    baseline = encode(vocab, names)
    seen = set(names)

    wanted = {SeverityClass.OBSERVED: cfg.n_observed, SeverityClass.EXPECTED: cfg.n_expected,
              SeverityClass.UNEXPECTED: cfg.n_unexpected, SeverityClass.SUSPICIOUS: cfg.n_suspicious,
              SeverityClass.HIGHLY_SUSPICIOUS: cfg.n_highly_suspicious}
    static_set = set(static)
    cand[SeverityClass.OBSERVED] = sorted(t for t in seen if t not in static_set)
    events, used = [], set()
    for cls in SeverityClass:
        pool = [t for t in dict.fromkeys(cand[cls]) if t not in used]
        if cls is not SeverityClass.OBSERVED:
            pool = [t for t in pool if t not in seen]
        pool.sort()
        k = min(wanted[cls], len(pool))
        pick = rng.choice(len(pool), size=k, replace=False) if k else []
        for i in sorted(int(x) for x in pick):
            used.add(pool[i])
            events.append(LabeledEvent(vocab.encode_triple(*pool[i]), cls))
    return baseline, events, vocab
