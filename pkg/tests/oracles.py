"""Independent reference computations used as test oracles.

Nothing here calls the sup recursion or the simplex: the chain enumeration
evaluates concrete switch recipes, and the small LP is solved by trying every
vertex.
"""

from fractions import Fraction
from itertools import combinations

from forkconvex.process_sets import SW, Gen


def chain_states(gens):
    """Node -> every (single, multiplier) state reachable by pure switching.

    A holder keeps one single times a multiplier.  At each node it may switch
    into any single; 0/0 = 1 applies when both values vanish, and a switch
    from a positive value into a zero one is skipped.  States are enumerated
    forward without merging, apart from exact duplicates; each carries the
    switch recipe that produces it.
    """
    tree = gens.tree
    states = {}
    for node in tree.nodes:
        n = node.id
        if node.parent is None:
            incoming = {(k, Fraction(1)): Gen(k) for k in gens.singles}
        else:
            incoming = states[node.parent]
        here = dict(incoming)
        for (k, c), recipe in incoming.items():
            v = c * gens.singles[k][n]
            for h, g in gens.singles.items():
                if h == k:
                    continue
                if g[n] > 0:
                    key = (h, v / g[n])
                elif v == 0:
                    key = (h, Fraction(1))
                else:
                    continue
                here.setdefault(key, SW(node.time, (n,), recipe, Gen(h)))
        states[n] = here
    return states


def chain_sup(gens, node, states=None):
    """Largest chain value at ``node``, and a recipe attaining it."""
    states = states if states is not None else chain_states(gens)
    parent = gens.tree.parent(node)
    pool = states[parent] if parent is not None else states[node]
    (k, c), recipe = max(pool.items(), key=lambda kv: kv[0][1] * gens.singles[kv[0][0]][node])
    return c * gens.singles[k][node], recipe


def solve_linear(rows, rhs):
    """Gaussian elimination over Fractions; None if singular."""
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((i for i in range(col, n) if m[i][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        for i in range(n):
            if i != col and m[i][col] != 0:
                f = m[i][col] / m[col][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


def vertex_max(constraints, objective):
    """max objective.x over {A x <= b} by enumerating vertices.

    ``constraints`` is a list of (coefficient list, rhs); nonnegativity must be
    listed explicitly.  Returns (value, point) or None when infeasible.
    """
    dim = len(objective)
    best = None
    for subset in combinations(constraints, dim):
        x = solve_linear([c for c, _ in subset], [b for _, b in subset])
        if x is None:
            continue
        if all(sum(a * v for a, v in zip(c, x)) <= b for c, b in constraints):
            val = sum(a * v for a, v in zip(objective, x))
            if best is None or val > best[0]:
                best = (val, x)
    return best


def binomial_lp_vertices():
    """Deflator LP of the binomial instance in (Y_u, Y_d, delta)."""
    h = Fraction(1, 2)
    cons = [
        ([h * 2, h * h, 0], Fraction(1)),   # stock: (2 Y_u + Y_d / 2) / 2 <= 1
        ([h, h, 0], Fraction(1)),           # bond: (Y_u + Y_d) / 2 <= 1
        ([0, 0, 1], Fraction(1)),           # delta <= Y(root) = 1
        ([-1, 0, 1], Fraction(0)),          # delta <= Y_u
        ([0, -1, 1], Fraction(0)),          # delta <= Y_d
        ([-1, 0, 0], Fraction(0)),
        ([0, -1, 0], Fraction(0)),
        ([0, 0, -1], Fraction(0)),
    ]
    return vertex_max(cons, [0, 0, 1])
