"""Signal-to-noise of the sample against an empty stage.

Repeated points with the sample removed give S_in; with the crossed sample
sector under the beam they give S_out. Counting noise shrinks as 1/sqrt(T), so
four times the integration should roughly double the SNR. The measured
hardware figure is printed for comparison only; it depends on apparatus
parameters this model does not share.
"""

from qpolscope.analysis import snr
from qpolscope.cli import REFERENCE_SNR, snr_ensembles
from qpolscope.config import resolve_config

cfg = resolve_config({"seed": 11})
values = []
for k, ratio in enumerate((1.0, 4.0, 16.0)):
    s_in, s_out = snr_ensembles(cfg, ratio, k)
    values.append(snr(s_in, s_out))
    t = cfg["scenario"]["integration_time_s"] * ratio
    print(f"T = {t:5.2f} s: S_in {s_in.mean():8.1f} +- {s_in.std(ddof=1):6.1f} Hz, "
          f"S_out {s_out.mean():6.1f} +- {s_out.std(ddof=1):5.1f} Hz, SNR {values[-1]:6.2f}")
print(f"SNR ratios per 4x: {values[1] / values[0]:.2f}, {values[2] / values[1]:.2f} (expect about 2)")
print(f"hardware reference value: {REFERENCE_SNR}")
