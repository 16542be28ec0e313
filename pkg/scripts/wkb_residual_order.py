"""Residual of the approximate solution versus epsilon, with and without the second level."""
import numpy as np

from kgres.grid import Grid1D, carrier_grid
from kgres.interaction import polarization_vector
from kgres.model import ModelParams, solve_phase
from kgres.wkb import cascade_init, residual_norm, residual_order, transport_advance


def main():
    table = {1: {}, 2: {}}
    for eps in (1e-2, 2.5e-3, 6.25e-4):
        p = ModelParams(epsilon=eps)
        ph = solve_phase(p)
        n = int(2 ** np.ceil(np.log2(2 * 9 * ph.k / eps * 10 / np.pi)))
        fine = carrier_grid(ph.k, eps, 10.0, n)
        coarse = Grid1D(fine.length, 256)
        sol = cascade_init(p, ph, coarse, np.exp(-coarse.x**2)[:, None] * polarization_vector(p, ph, 1), T=2.0)
        sol = transport_advance(sol, 0.02, 15)
        for orders in table:
            table[orders][eps] = residual_norm(sol, eps, fine, orders=orders)
        print(f"eps={eps:g}  residual(levels 0-2)={table[2][eps]:.4f}  residual(levels 0-1)={table[1][eps]:.4f}")
    for orders, norms in table.items():
        print(f"slope with levels up to {orders}: {residual_order(norms):.3f}")


if __name__ == "__main__":
    main()
