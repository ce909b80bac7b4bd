"""
Exact rational simplex.

Decides whether target = A q has a solution with q >= 0 and sum(q) = 1,
and computes the exact L1 distance from target to that hull. Fractions
throughout, Bland's rule for entering and leaving variables.
"""

import logging
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

log = logging.getLogger(__name__)


def to_fraction(x, max_denominator: int = 10 ** 12) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(max_denominator)


class Tableau:
    """Dense phase-1 tableau: rows are constraints, last column is the rhs"""

    def __init__(self, rows: List[List[Fraction]], num_original: int):
        m = len(rows)
        self.m = m
        self.n = num_original
        # Columns: originals, then one artificial per row, then rhs
        self.T: List[List[Fraction]] = []
        for i, row in enumerate(rows):
            coeffs, rhs = row[:-1], row[-1]
            if rhs < 0:
                coeffs = [-c for c in coeffs]
                rhs = -rhs
            art = [Fraction(0)] * m
            art[i] = Fraction(1)
            self.T.append(list(coeffs) + art + [rhs])
        self.basis = [num_original + i for i in range(m)]
        width = num_original + m
        # Reduced costs of the phase-1 objective (sum of artificials)
        self.cost = [Fraction(0)] * (width + 1)
        for row in self.T:
            for k in range(num_original):
                self.cost[k] -= row[k]
            self.cost[width] -= row[width]
        self.width = width
        self.pivots = 0

    @classmethod
    def from_basis(cls, T: List[List[Fraction]], basis: List[int], costs: Sequence[Fraction],
                   num_original: int) -> 'Tableau':
        """Tableau already in canonical form for `basis`, minimising costs . x"""
        tab = cls.__new__(cls)
        tab.m = len(T)
        tab.n = num_original
        tab.T = T
        tab.basis = list(basis)
        tab.width = len(costs)
        tab.cost = list(costs) + [Fraction(0)]
        for i, k in enumerate(basis):
            f = tab.cost[k]
            if f != 0:
                tab.cost = [a - f * b for a, b in zip(tab.cost, T[i])]
        tab.pivots = 0
        return tab

    def objective(self) -> Fraction:
        return -self.cost[self.width]

    def _pivot(self, r: int, c: int) -> None:
        row = self.T[r]
        piv = row[c]
        self.T[r] = row = [v / piv for v in row]
        for i in range(self.m):
            if i == r:
                continue
            f = self.T[i][c]
            if f != 0:
                other = self.T[i]
                self.T[i] = [a - f * b for a, b in zip(other, row)]
        f = self.cost[c]
        if f != 0:
            self.cost = [a - f * b for a, b in zip(self.cost, row)]
        self.basis[r] = c
        self.pivots += 1

    def run(self, max_pivots: int = 1_000_000) -> None:
        while self.pivots < max_pivots:
            entering = next((k for k in range(self.width) if self.cost[k] < 0), None)
            if entering is None:
                return
            best = None
            for i in range(self.m):
                a = self.T[i][entering]
                if a > 0:
                    ratio = self.T[i][self.width] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                # Both objectives are bounded below by 0
                raise ArithmeticError("unbounded tableau")
            self._pivot(best[1], entering)
        raise ArithmeticError(f"no convergence after {max_pivots} pivots")

    def solution(self) -> List[Fraction]:
        x = [Fraction(0)] * self.width
        for i, k in enumerate(self.basis):
            x[k] = self.T[i][self.width]
        return x[:self.n]


def feasible_convex_combination(columns: Sequence[Sequence], target: Sequence) -> Optional[List[Fraction]]:
    """
    Weights q >= 0 with sum(q) = 1 and sum_k q_k columns[k] = target, or
    None when no such combination exists. Entries may be ints, floats or
    Fractions; floats are converted with limit_denominator.
    """
    if not columns:
        return None
    dim = len(target)
    n = len(columns)
    cols = [[to_fraction(v) for v in col] for col in columns]
    tgt = [to_fraction(v) for v in target]
    rows = []
    for r in range(dim):
        rows.append([cols[k][r] for k in range(n)] + [tgt[r]])
    rows.append([Fraction(1)] * n + [Fraction(1)])

    tab = Tableau(rows, n)
    tab.run()
    log.debug(f"exact phase-1: {dim + 1} rows, {n} columns, {tab.pivots} pivots, "
              f"residual {tab.objective()}")
    if tab.objective() != 0:
        return None
    return tab.solution()


def l1_distance_exact(columns: Sequence[Sequence], target: Sequence) -> Tuple[Fraction, List[Fraction]]:
    """
    min ||A q - target||_1 over the simplex, solved in rationals.
    Returns (distance, q); q sums to exactly 1.
    """
    if not columns:
        raise ValueError("no columns")
    dim = len(target)
    n = len(columns)
    cols = [[to_fraction(v) for v in col] for col in columns]
    tgt = [to_fraction(v) for v in target]
    zero, one = Fraction(0), Fraction(1)

    # Columns: q, then s+ and s- per row. Start from q = e_0 with the
    # residual of every row carried by whichever slack makes it nonnegative.
    T: List[List[Fraction]] = []
    basis: List[int] = []
    for r in range(dim):
        base = cols[0][r]
        row = [zero] + [cols[k][r] - base for k in range(1, n)]
        plus = [zero] * dim
        minus = [zero] * dim
        plus[r], minus[r] = one, -one
        rhs = tgt[r] - base
        if rhs < 0:
            row = [-v for v in row]
            plus, minus = [-v for v in plus], [-v for v in minus]
            rhs = -rhs
            basis.append(n + dim + r)
        else:
            basis.append(n + r)
        T.append(row + plus + minus + [rhs])
    T.append([one] * n + [zero] * (2 * dim) + [one])
    basis.append(0)

    costs = [zero] * n + [one] * (2 * dim)
    tab = Tableau.from_basis(T, basis, costs, n)
    tab.run()
    log.debug(f"exact L1 distance: {dim + 1} rows, {n} columns, {tab.pivots} pivots, "
              f"distance {tab.objective()}")
    return tab.objective(), tab.solution()
