"""Plain-text graph format.

::

    nodes 4 latents 1
    0 -> 1
    4 -> 2
    2 <> 3
    1 o> 3

The header is mandatory.  Each edge line is ``u <mark><mark> v`` where the
left mark is one of ``- < o`` and the right mark one of ``- > o``.  Latent
ids are ``n .. n+l-1``.  Blank lines and lines starting with ``#`` are
ignored.
"""

from __future__ import annotations

import os
from typing import List, Tuple, Union

from .graphs import Dag, GraphError, Mark, MixedGraph, Pag

_LEFT = {"-": Mark.TAIL, "<": Mark.ARROW, "o": Mark.CIRCLE}
_RIGHT = {"-": Mark.TAIL, ">": Mark.ARROW, "o": Mark.CIRCLE}
_LEFT_OUT = {v: k for k, v in _LEFT.items()}
_RIGHT_OUT = {v: k for k, v in _RIGHT.items()}


class ParseError(GraphError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


def parse_text(text: str) -> Tuple[int, int, List[Tuple[int, int, Mark, Mark]]]:
    """Return ``(n, n_latent, edges)`` with edges as ``(u, v, mark_u, mark_v)``."""
    header = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 4 or parts[0] != "nodes" or parts[2] != "latents":
                raise ParseError(lineno, "expected header 'nodes <n> latents <l>'")
            try:
                header = (int(parts[1]), int(parts[3]))
            except ValueError:
                raise ParseError(lineno, "header counts must be integers") from None
            continue
        if len(parts) != 3 or len(parts[1]) != 2:
            raise ParseError(lineno, f"expected 'u <mark><mark> v', got {line!r}")
        left, right = parts[1][0], parts[1][1]
        if left not in _LEFT or right not in _RIGHT:
            raise ParseError(lineno, f"unknown edge marks {parts[1]!r}")
        try:
            u, v = int(parts[0]), int(parts[2])
        except ValueError:
            raise ParseError(lineno, "node ids must be integers") from None
        total = header[0] + header[1]
        if not (0 <= u < total and 0 <= v < total):
            raise ParseError(lineno, f"node id out of range for {total} nodes")
        edges.append((u, v, _LEFT[left], _RIGHT[right]))
    if header is None:
        raise ParseError(0, "missing header")
    return header[0], header[1], edges


def _dag_edges(edges):
    out = []
    for u, v, mu, mv in edges:
        if mu is Mark.TAIL and mv is Mark.ARROW:
            out.append((u, v))
        elif mu is Mark.ARROW and mv is Mark.TAIL:
            out.append((v, u))
        else:
            raise GraphError(f"DAG files may only hold directed edges, got {u} {mu.value}{mv.value} {v}")
    return out


def dag_from_text(text: str) -> Dag:
    n, n_lat, edges = parse_text(text)
    return Dag(n, _dag_edges(edges), n_lat)


def mixed_from_text(text: str, kind=Pag) -> MixedGraph:
    n, n_lat, edges = parse_text(text)
    if n_lat:
        raise GraphError("mixed graphs cannot contain latent nodes")
    return kind(n, edges)


def dag_to_text(d: Dag) -> str:
    lines = [f"nodes {d.n} latents {d.n_latent}"]
    lines += [f"{a} -> {b}" for a, b in sorted(d.edges)]
    return "\n".join(lines) + "\n"


def mixed_to_text(g: MixedGraph) -> str:
    lines = [f"nodes {g.n} latents 0"]
    lines += [f"{u} {_LEFT_OUT[mu]}{_RIGHT_OUT[mv]} {v}" for u, v, mu, mv in g.edges()]
    return "\n".join(lines) + "\n"


PathLike = Union[str, "os.PathLike[str]"]


def read_dag(path: PathLike) -> Dag:
    with open(path, encoding="utf-8") as fh:
        return dag_from_text(fh.read())


def write_dag(d: Dag, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dag_to_text(d))


def read_mixed(path: PathLike, kind=Pag) -> MixedGraph:
    with open(path, encoding="utf-8") as fh:
        return mixed_from_text(fh.read(), kind)


def write_mixed(g: MixedGraph, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(mixed_to_text(g))

