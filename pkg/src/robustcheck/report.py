"""JSON reports and knowledge plots.

Reports are plain dicts whose key order is fixed, so ``json.dumps`` output is
byte-stable across runs. Wall-clock times are only included on request.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import __version__
from .attacks import substitute
from .knowledge import _class_memories, public_part
from .semantics import DIV, PI, PS, Machine, format_low, low_projection
from .syntax import Program, pretty_attack

TOOL = "robustcheck"


def header() -> dict:
    return {"tool": TOOL, "version": __version__}


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def verdict_report(path: str, verdict, seconds: Optional[float] = None) -> dict:
    doc = {**header(), "file": path, **verdict.as_dict()}
    if seconds is not None:
        doc["seconds"] = round(seconds, 4)
    return doc


def typecheck_report(path: str, diagnostics: Sequence, seconds: Optional[float] = None) -> dict:
    doc = {**header(), "file": path, "status": "ok" if not diagnostics else "error",
           "diagnostics": [d.as_dict() for d in diagnostics]}
    if seconds is not None:
        doc["seconds"] = round(seconds, 4)
    return doc


# ------------------------------------------------------------ knowledge sizes

@dataclass(frozen=True)
class KnowledgeProfile:
    """Knowledge sizes after each prefix of one run's low events."""
    label: str
    events: tuple  # formatted low events of the run (markers included)
    knowledge: tuple  # |k| after 0..n events
    progress: tuple  # |k→| after 0..n-1 events
    releases: tuple  # positions whose event shrinks knowledge
    class_size: int

    def as_dict(self) -> dict:
        return {"label": self.label, "class_size": self.class_size, "events": list(self.events),
                "knowledge": list(self.knowledge), "progress_knowledge": list(self.progress),
                "releases": list(self.releases)}


def knowledge_profile(p: Program, m: Mapping[str, int], attack=(), mode: str = PS,
                      label: Optional[str] = None, limit: int = 32) -> KnowledgeProfile:
    """Sizes of k and k→ along the run of ``p[attack]`` from ``m`` (first ``limit`` events)."""
    machine = Machine(substitute(p, attack), p.env.variables, p.domain)
    mems = list(_class_memories(p, public_part(p, m)))
    lows = [low_projection(machine.run(tuple(x[v] for v in p.env.variables)), p.env, mode)
            for x in mems]
    anchor = low_projection(machine.run(tuple(m[v] for v in p.env.variables)), p.env, mode)
    n = int(min(anchor.length, limit))
    ks, kps, rel = [], [], []
    for i in range(n + 1):
        pre = anchor.take(i)
        k = [s for s in lows if s.has_prefix(pre)]
        ks.append(len(k))
        if i < n:
            # a divergence marker is not a further low event
            kps.append(sum(1 for s in k if s.length > i and s[i] != DIV))
    for i in range(n):
        before = ks[i] if mode == PS else kps[i]
        if ks[i + 1] < before:
            rel.append(i)
    events = tuple(format_low(anchor[i]) for i in range(n))
    if label is None:
        label = pretty_attack(attack) if attack else "no attack"
    return KnowledgeProfile(label, events, tuple(ks), tuple(kps), tuple(rel), len(mems))


def plot_profiles(profiles: Sequence[KnowledgeProfile], path, title: str = "") -> Path:
    """Step plot of knowledge size per observed low event, one line per profile."""
    import matplotlib
    matplotlib.use("Agg")
    from matplotlib import pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 3.8))
    for idx, prof in enumerate(profiles):
        xs = list(range(len(prof.knowledge)))
        line, = ax.step(xs, prof.knowledge, where="post", label=f"k: {prof.label}",
                        linewidth=1.6, zorder=3 - idx * 0.1)
        if prof.progress:
            ax.step(list(range(len(prof.progress))), prof.progress, where="post",
                    linestyle="--", color=line.get_color(), alpha=0.6,
                    label=f"k→: {prof.label}")
        for r in prof.releases:
            ax.axvline(r + 1, color=line.get_color(), alpha=0.25, linestyle=":")
        for i, ev in enumerate(prof.events):
            ax.annotate(ev, (i + 1, prof.knowledge[i + 1]), textcoords="offset points",
                        xytext=(3, 4 + 9 * idx), fontsize=7, color=line.get_color())
    longest = max(len(pr.events) for pr in profiles)
    ax.set_xticks(range(longest + 1))
    ax.set_xlim(-0.2, longest + 0.8)
    ax.set_xlabel("number of low events observed")
    ax.set_ylabel("memories in knowledge")
    top = max(max(pr.knowledge) for pr in profiles)
    ax.set_ylim(0, top * 1.2 + 0.5)
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def verdict_figure(p: Program, verdict, path, universe: Sequence) -> Optional[Path]:
    """Plot the witness run (and the offending attack's run) of a reject verdict."""
    w = verdict.witness
    if w is None or verdict.prop == "integrity":
        return None
    by_name = {pretty_attack(a): a for a in universe}
    m = w["memory"]
    full = {x: m.get(x, 0) for x in p.env.variables}
    mode = PI if verdict.mode == PI else PS
    profiles = [knowledge_profile(p, full, by_name[w["attack"]], mode),
                knowledge_profile(p, full, by_name[w["offending_attack"]], mode)]
    mem = ", ".join(f"{k}={v}" for k, v in m.items())
    return plot_profiles(profiles, path, f"{verdict.prop} ({verdict.mode}) rejected at {mem}")
