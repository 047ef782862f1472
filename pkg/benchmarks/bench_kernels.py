"""Particle-step kernel benchmark: numba vs pure numpy.

Both backends advance the same ensemble with the same random inputs, so the
script also checks that their outputs agree before timing them.

    python benchmarks/bench_kernels.py [--molecules 200000] [--steps 200]
"""

import argparse
import time

import numpy as np

from dfrelay._accel import HAVE_NUMBA
from dfrelay.link_analysis import LinkConfig
from dfrelay.particle_sim import kernels
from dfrelay.particle_sim.desorption import balanced_desorption


def make_inputs(n, steps, seed=0):
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((steps, n, 3))
    uniforms = rng.random((steps, 2, n))
    return normals, uniforms


def run(use_numba, n, normals, uniforms, params):
    link = LinkConfig()
    pos = np.tile([-link.d_sr, 0.0, 0.0], (n, 1))
    # start close to the surface so binding and release are exercised
    pos[:, 0] = -(link.r_r + 0.3)
    bound = np.zeros(n, dtype=bool)
    counts = []
    t0 = time.perf_counter()
    for s in range(normals.shape[0]):
        counts.append(kernels.step(pos, bound, normals[s], uniforms[s, 0], uniforms[s, 1],
                                   use_numba=use_numba, **params))
    return time.perf_counter() - t0, counts, pos


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--molecules", type=int, default=200_000)
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args()

    link = LinkConfig()
    dt = 0.002
    table = balanced_desorption(link.r_r, link.kon_r, link.koff_r, link.diffusion, dt)
    params = dict(sigma=np.sqrt(2 * link.diffusion * dt), radius=link.r_r, D=link.diffusion, dt=dt,
                  p_unbind=table.p_release, k_on=link.kon_r, rule=kernels.RULE_ROBIN,
                  placement=kernels.PLACE_BALANCED, x_grid=table.x_grid, cdf=table.cdf)
    normals, uniforms = make_inputs(args.molecules, args.steps)
    work = args.molecules * args.steps

    t_np, c_np, p_np = run(False, args.molecules, normals, uniforms, params)
    print(f"numpy : {t_np:8.3f} s  {work / t_np / 1e6:8.2f} M molecule-steps/s")
    if not HAVE_NUMBA:
        print("numba : unavailable (not installed or DFRELAY_DISABLE_NUMBA set)")
        return
    run(True, 1000, normals[:2, :1000], uniforms[:2, :, :1000], params)  # compile
    t_nb, c_nb, p_nb = run(True, args.molecules, normals, uniforms, params)
    print(f"numba : {t_nb:8.3f} s  {work / t_nb / 1e6:8.2f} M molecule-steps/s")
    print(f"speedup: {t_np / t_nb:.1f}x")
    same = c_np == c_nb and np.array_equal(p_np, p_nb)
    print(f"identical trajectories: {same}")


if __name__ == "__main__":
    main()
