"""Raster the spiral retarder and compare the two image planes.

Inside the aperture the transmitted polarization turns with azimuth, so the
coincidence image shows two bright and two dark lobes. The g2(0) image is
nearly flat on the bright lobes and drops sharply where the analyzer is
crossed, which makes it the higher-contrast plane across a dark sector and the
lower-contrast plane across a slope. The opaque mount shows accidentals only.
"""

import math

import numpy as np

from qpolscope import ScanGrid, Scenario, line_profile, normalized_contrast, scan_image
from qpolscope.scan import suggested_profile_lines

sc = Scenario(rotating_analyzer_deg=24.0)
grid = ScanGrid()
img = scan_image(sc, grid, seed=3, workers=4)

shades = " .:-=+*#%@"


def render(plane):
    p = np.nan_to_num(plane)
    lo, hi = p.min(), p.max()
    for row in p[::-1]:  # top of the printout is +y
        print("".join(shades[int((v - lo) / (hi - lo + 1e-300) * (len(shades) - 1))] * 2 for v in row))


print("coincidence rate")
render(img.coincidence_rate_hz)
print("\ng2(0)")
render(img.g2_zero)

for name, (start, end) in suggested_profile_lines(sc, grid).items():
    prof = line_profile(img, start, end)
    cg = normalized_contrast(prof.g2_zero, img.g2_zero)
    cc = normalized_contrast(prof.coincidence_rate_hz, img.coincidence_rate_hz)
    print(f"{name:5s} line {start} -> {end}: g2 contrast {cg:.2f}, coincidence contrast {cc:.2f}")

mount = [img.coincidence_rate_hz[iy, ix] for ix, iy in grid.pixels()
         if math.hypot(*grid.center_mm(ix, iy)) > 13.7]
print(f"mount pixels: mean coincidence rate {np.mean(mount):.1f} Hz")
