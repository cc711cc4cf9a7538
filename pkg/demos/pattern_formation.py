"""Long-range tophat competition with short dispersal forms patterns.

A tophat competition kernel has negative Fourier components, so when its
range is much longer than the dispersal range the population organises into
clumps spaced at the competition scale.  Each entity still balances fission
against its local death rate, but the patterned state depresses the pair
density over the kernel range and the stationary density exceeds the
mean-field carrying capacity by ~20%.  Widening the dispersal to the
competition range washes the pattern out and restores mean field.
"""

import numpy as np

from srs import (
    FissionKernel,
    KernelSet,
    MortalityField,
    RadialKernel,
    TorusGeometry,
    init_poisson,
    run,
)

GEOM = TorusGeometry(dim=1, side=400.0)
COMP = RadialKernel("tophat", 10.0, 0.005, dim=1)  # mass 0.1, capacity (1-0.2)/0.1 = 8


def stationary_density(dispersal_range, seed=3):
    beta = RadialKernel("tophat", dispersal_range, 0.5 / dispersal_range, dim=1)  # rate 1
    kernels = KernelSet(COMP, MortalityField(0.2), FissionKernel.delta(beta))
    state = init_poisson(4.0, GEOM, kernels, seed)
    res = run(state, horizon=25.0, snapshot_times=[20.0, 25.0], replica=0)
    dens = np.mean([s.n_points for s in res.snapshots]) / GEOM.volume
    return dens, res.snapshots[-1].points[:, 0]


def occupancy_sketch(positions, bins=80):
    counts, _ = np.histogram(positions, bins=bins, range=(0.0, GEOM.side))
    top = counts.max()
    return "".join(" .:-=+*#%@"[min(9, int(9 * c / top))] for c in counts)


if __name__ == "__main__":
    print("mean-field carrying capacity: 8.0\n")
    for R in (1.0, 10.0):
        dens, pos = stationary_density(R)
        print(f"dispersal range {R:4.1f}: stationary density {dens:6.3f}")
        print(f"  occupancy [{occupancy_sketch(pos)}]")
    print("\nshort dispersal clumps at the competition scale; matched dispersal is flat.")
