"""How closely the soft top-k selectors track the exact top-k as N grows.

    python demos/selection_error_curve.py

Prints the mean relative L2 gap between soft-selected and exactly selected
feature rows (k = 10) for several sharpness values, on standard-normal
scores and features.
"""

from clipsum.cli import selection_error_curve


def main():
    sizes = [64, 256, 1024, 4096]
    for alpha in (100.0, 1000.0, 10000.0):
        print(f"alpha = {alpha:g}")
        for size, method, mean_err, max_err in selection_error_curve(sizes, 10, alpha, 10, 16, seed=0):
            print(f"  N={size:5d}  {method:24s} mean {mean_err:.4f}  max {max_err:.4f}")


if __name__ == "__main__":
    main()
