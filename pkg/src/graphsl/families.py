"""Generators for the graph families used throughout the tests and fixtures.

Each function returns a plain JSON-style document accepted by
:func:`graphsl.graph.load_graph`, so tests exercise the same loading path as
the CLI.
"""

from __future__ import annotations


def path(n_edges: int, length: float = 1.0) -> dict:
    """Chain of ``n_edges`` edges; root at one end (half-line stand-in)."""
    vertices = [f"v{i:02d}" for i in range(n_edges + 1)]
    edges = [
        {"id": f"e{i:02d}", "from": f"v{i - 1:02d}", "to": f"v{i:02d}", "length": length}
        for i in range(1, n_edges + 1)
    ]
    return {"vertices": vertices, "edges": edges, "root": "v00"}


def star(arms: int = 3, length: float = 1.0) -> dict:
    """Star with ``arms`` edges of equal length around a center root."""
    vertices = ["c"] + [f"l{i}" for i in range(1, arms + 1)]
    edges = [
        {"id": f"a{i}", "from": "c", "to": f"l{i}", "length": length}
        for i in range(1, arms + 1)
    ]
    return {"vertices": vertices, "edges": edges, "root": "c"}


def tree(depth: int, branching: int = 2, length: float = 1.0) -> dict:
    """Rooted tree where every non-leaf vertex has ``branching`` children."""
    vertices = ["n0"]
    edges = []
    frontier = ["n0"]
    counter = 1
    for _ in range(depth):
        next_frontier = []
        for parent in frontier:
            for _ in range(branching):
                child = f"n{counter}"
                counter += 1
                vertices.append(child)
                edges.append(
                    {"id": f"t{counter - 1:03d}", "from": parent, "to": child, "length": length}
                )
                next_frontier.append(child)
        frontier = next_frontier
    return {"vertices": vertices, "edges": edges, "root": "n0"}


def ladder(rungs: int, length: float = 1.0) -> dict:
    """Two parallel rails joined by ``rungs`` rungs; root at one rail end."""
    if rungs < 2:
        raise ValueError("ladder needs at least 2 rungs")
    vertices = [f"u{i}" for i in range(rungs)] + [f"w{i}" for i in range(rungs)]
    edges = []
    for i in range(rungs - 1):
        edges.append({"id": f"ru{i}", "from": f"u{i}", "to": f"u{i + 1}", "length": length})
        edges.append({"id": f"rw{i}", "from": f"w{i}", "to": f"w{i + 1}", "length": length})
    for i in range(rungs):
        edges.append({"id": f"rr{i}", "from": f"u{i}", "to": f"w{i}", "length": length})
    return {"vertices": vertices, "edges": edges, "root": "u0"}


def cycle(n_edges: int, length: float = 1.0) -> dict:
    """Closed cycle of ``n_edges`` edges."""
    if n_edges < 3:
        raise ValueError("cycle needs at least 3 edges to stay simple")
    vertices = [f"v{i}" for i in range(n_edges)]
    edges = [
        {
            "id": f"c{i}",
            "from": f"v{i}",
            "to": f"v{(i + 1) % n_edges}",
            "length": length,
        }
        for i in range(n_edges)
    ]
    return {"vertices": vertices, "edges": edges, "root": "v0"}
