"""Heteroclinic structure of the slanted four-atom system across gamma."""
from pwl_hidden import SystemParams, Variant, build_system, classify_structure, gamma_interval


def main():
    gi = gamma_interval(0.2, 5.0, 1.0)
    print(f"six-orbit interval: gamma in ({gi.gamma_L:.6f}, {gi.gamma_U:.6f}), tau = {gi.tau:.6f}")
    for gamma in (1.5, 2.0, 2.5, 3.0):
        census = classify_structure(build_system(
            SystemParams(0.2, 5.0, -3.0, 1.0, gamma, Variant.FOUR_ATOM_SLANTED)))
        pairs = [f"{o.from_eq}->{o.to_eq}" for o in census.orbits if census.verified(o.from_eq, o.to_eq)]
        print(f"gamma = {gamma:>4}: {census.regime.value:<24} loops {len(census.loops)}, "
              f"orbits {' '.join(pairs)}")


if __name__ == "__main__":
    main()
