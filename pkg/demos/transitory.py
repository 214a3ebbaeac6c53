"""Transient duration from the origin before capture by a self-excited scroll."""
from pwl_hidden import SystemParams, transitory_sweep


def main():
    results = transitory_sweep(SystemParams(0.2, 5.0, -7.0, 1.0), [5.0, 15.0, 100.0, 1000.0])
    for r in results:
        t = "not captured" if r.t_capture is None else f"{r.t_capture:9.1f}"
        print(f"gamma = {r.gamma:>6}: t_capture = {t}  pair {r.captured_pair}")


if __name__ == "__main__":
    main()
