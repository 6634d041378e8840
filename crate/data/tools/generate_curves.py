#!/usr/bin/env python3
"""Regenerate the ground-truth curve files under data/.

The curves are evaluated from published parametric models of human contrast
perception; see the `source=` line written into every file. Run from the
repository root:

    python3 data/tools/generate_curves.py
"""

import math
import os

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
PPD = 60.0
FIELD_DEG = 224 / PPD


def geomspace(lo, hi, n):
    return [lo * (hi / lo) ** (i / (n - 1)) for i in range(n)]


def barten(u, lum, x0):
    """Barten's simplified achromatic CSF (Barten 2003, SPIE 5294)."""
    num = 5200.0 * math.exp(-0.0016 * u * u * (1.0 + 100.0 / lum) ** 0.08)
    den = math.sqrt(
        (1.0 + 144.0 / (x0 * x0) + 0.64 * u * u)
        * (63.0 / lum ** 0.83 + 1.0 / (1.0 - math.exp(-0.02 * u * u)))
    )
    return num / den


def gabor_field(radius):
    # Square field with the same area as the Gaussian envelope (2*pi*R^2).
    return math.sqrt(2.0 * math.pi) * radius


def chromatic(rho, s_peak, rho_c=2.0, radius=1.0, n_c=2.0):
    """Low-pass chromatic CSF with cycle summation over the Gabor diameter."""
    n = 2.0 * radius * rho
    return s_peak / (1.0 + (rho / rho_c) ** 2) * math.sqrt(n * n / (n * n + n_c * n_c))


def foley_threshold(mask, p=2.4, q=2.0, c0=0.005, z=0.01 ** 2):
    """Excitation/inhibition transducer R(c) = k c^p / (z + c^q); unit response increment."""
    k = 1.0 / (c0 ** p / (z + c0 ** q))

    def resp(c):
        return k * c ** p / (z + c ** q)

    lo, hi = 1e-7, 10.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if resp(mask + mid) - resp(mask) - 1.0 > 0:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


def noise_masking_threshold(mask, c0=0.006, knee=0.03, slope=0.8):
    """Threshold-versus-contrast function without facilitation."""
    return c0 * (1.0 + (mask / knee) ** 2) ** (slope / 2.0)


def write_curve(rel, test_id, x_axis, y_axis, source, points, extra=()):
    path = os.path.join(ROOT, rel)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        f.write(f"# test_id={test_id}\n")
        f.write(f"# x_axis={x_axis}\n")
        f.write(f"# y_axis={y_axis}\n")
        f.write(f"# source={source}\n")
        for key, value in extra:
            f.write(f"# {key}={value}\n")
        f.write("x,y\n")
        for x, y in points:
            f.write(f"{x:.10g},{y:.10g}\n")


def main():
    sf = geomspace(0.5, 32.0, 25)
    write_curve(
        "detection/gabor-ach.csv", "gabor-ach", "cpd", "sensitivity",
        "Barten (2003) simplified CSF; L=100 cd/m2; field = equal-area square of a 1 deg Gabor",
        [(r, barten(r, 100.0, gabor_field(1.0))) for r in sf],
    )
    write_curve(
        "detection/noise-ach.csv", "noise-ach", "cpd", "sensitivity",
        "Barten (2003) simplified CSF; L=100 cd/m2; field = full 3.73 deg image",
        [(r, barten(r, 100.0, FIELD_DEG)) for r in sf],
    )
    write_curve(
        "detection/gabor-rg.csv", "gabor-rg", "cpd", "sensitivity",
        "Low-pass chromatic CSF after Mullen (1985), peak 330 DKL units, corner 2 cpd, cycle summation n_c=2",
        [(r, chromatic(r, 330.0)) for r in sf],
    )
    write_curve(
        "detection/gabor-yv.csv", "gabor-yv", "cpd", "sensitivity",
        "Low-pass chromatic CSF after Mullen (1985), peak 70 DKL units, corner 2 cpd, cycle summation n_c=2",
        [(r, chromatic(r, 70.0)) for r in sf],
    )
    write_curve(
        "detection/luminance.csv", "luminance", "cd/m2", "sensitivity",
        "Barten (2003) simplified CSF; 2 cpd; field = equal-area square of a 1 deg Gabor",
        [(lum, barten(2.0, lum, gabor_field(1.0))) for lum in geomspace(0.1, 200.0, 25)],
    )
    write_curve(
        "detection/area.csv", "area", "degrees", "sensitivity",
        "Barten (2003) simplified CSF; 8 cpd; L=100 cd/m2; field = equal-area square of the Gabor",
        [(rad, barten(8.0, 100.0, gabor_field(rad))) for rad in geomspace(0.1, 1.0, 25)],
    )
    write_curve(
        "masking/coherent.csv", "masking-coherent", "mask_contrast", "threshold_contrast",
        "Foley (1994) excitation/inhibition transducer, p=2.4 q=2, unmasked threshold 0.005, z=0.01^2",
        [(m, foley_threshold(m)) for m in geomspace(0.005, 0.5, 12)],
    )
    write_curve(
        "masking/incoherent.csv", "masking-incoherent", "mask_contrast", "threshold_contrast",
        "Noise-masking TvC after Gegenfurtner & Kiper (1992): c0=0.006, knee 0.03, slope 0.8, no facilitation",
        [(m, noise_masking_threshold(m)) for m in geomspace(0.005, 0.5, 10)],
    )
    ref_threshold = 1.0 / barten(5.0, 10.0, FIELD_DEG)
    tests = [0.25, 0.5, 1.0, 2.0, 10.0, 15.0, 20.0, 25.0]
    for c_r in geomspace(0.005, 0.629, 8):
        pts = []
        for rho in tests:
            c_t = c_r - ref_threshold + 1.0 / barten(rho, 10.0, FIELD_DEG)
            if c_r > ref_threshold and c_t <= 1.0:
                pts.append((rho, c_t))
        write_curve(
            f"matching/cr_{c_r:.4f}.csv", "matching", "cpd", "matched_contrast",
            "Georgeson & Sullivan (1975) constancy via the subtractive matching rule "
            "c_t - T(rho_t) = c_r - T(5 cpd); T from Barten (2003) at 10 cd/m2, full field",
            pts,
            extra=[("reference_contrast", f"{c_r:.10g}")],
        )


if __name__ == "__main__":
    main()
