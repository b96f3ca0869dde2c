"""Independent brute-force oracles used to cross-check the library.

Everything here works by explicit enumeration of simple paths or pairs and
shares no code with the package beyond the graph containers.
"""

from itertools import combinations

from collabcausal.graphs import Dag, Mark, MixedGraph


def _dag_edges(d: Dag):
    """Undirected adjacency with (mark at self, mark at other)."""
    adj = {w: [] for w in d.nodes}
    for a, b in d.edges:
        adj[a].append((b, "-", ">"))
        adj[b].append((a, ">", "-"))
    return adj


def _mixed_edges(g: MixedGraph):
    adj = {w: [] for w in g.nodes}
    for u, v, mu, mv in g.edges():
        adj[u].append((v, mu.value, mv.value))
        adj[v].append((u, mv.value, mu.value))
    return adj


def _descendants_plain(adj, w):
    """Nodes reachable from w by tail->arrow steps, including w."""
    out, stack = set(), [w]
    while stack:
        x = stack.pop()
        if x in out:
            continue
        out.add(x)
        for y, mx, my in adj[x]:
            if mx == "-" and my == ">":
                stack.append(y)
    return out


def simple_paths(adj, u, v):
    """Yield every simple path as a list of (node, mark_in, mark_out) hops."""
    def rec(path, marks, visited):
        x = path[-1]
        if x == v:
            yield list(path), list(marks)
            return
        for y, mx, my in adj[x]:
            if y in visited:
                continue
            visited.add(y)
            path.append(y)
            marks.append((mx, my))
            yield from rec(path, marks, visited)
            path.pop()
            marks.pop()
            visited.discard(y)

    yield from rec([u], [], {u})


def _path_open(path, marks, z, adj):
    for i in range(1, len(path) - 1):
        w = path[i]
        arrow_in = marks[i - 1][1] == ">"
        arrow_out = marks[i][0] == ">"
        if arrow_in and arrow_out:
            if not (_descendants_plain(adj, w) & z):
                return False
        elif w in z:
            return False
    return True


def brute_separated(adj, u, v, z):
    z = set(z)
    return not any(_path_open(p, m, z, adj) for p, m in simple_paths(adj, u, v))


def brute_d_separated(d: Dag, u, v, z):
    return brute_separated(_dag_edges(d), u, v, z)


def brute_m_separated(g: MixedGraph, u, v, z):
    return brute_separated(_mixed_edges(g), u, v, z)


def brute_inducing_path(d: Dag, u, v):
    """An inducing path relative to the latents exists between u and v.

    Every observed interior node must be a collider, and every collider must
    be an ancestor of u or v.
    """
    adj = _dag_edges(d)
    anc_uv = set()
    for w in d.nodes:
        desc = _descendants_plain(adj, w)
        if u in desc or v in desc:
            anc_uv.add(w)
    for path, marks in simple_paths(adj, u, v):
        ok = True
        for i in range(1, len(path) - 1):
            w = path[i]
            collider = marks[i - 1][1] == ">" and marks[i][0] == ">"
            if not collider and w < d.n:
                ok = False
                break
            if collider and w not in anc_uv:
                ok = False
                break
        if ok:
            return True
    return False


def brute_pair_metrics(pred_blocks, true_blocks):
    label_p = {e: i for i, b in enumerate(pred_blocks) for e in b}
    label_t = {e: i for i, b in enumerate(true_blocks) for e in b}
    ents = sorted(label_t)
    tp = pt = tt = agree = total = 0
    for a, b in combinations(ents, 2):
        p = label_p[a] == label_p[b]
        t = label_t[a] == label_t[b]
        total += 1
        pt += p
        tt += t
        tp += p and t
        agree += p == t
    prec = tp / pt if pt else 1.0
    rec = tp / tt if tt else 1.0
    acc = agree / total if total else 1.0
    return prec, rec, acc
