"""
Six physiological features from raw streams
============================================

Feeds one simulated student's channels into a stream buffer and prints
the feature vector as the sliding window fills up.
"""

import numpy as np

from affectloop.errors import WarmupError
from affectloop.features import extract_features
from affectloop.ingest import SensorSample, StreamSet

rng = np.random.default_rng(0)
streams = StreamSet()

print("second | scr    scl    hr     hrv    str    stl")
for t in range(30):
    # a calm student: steady heart rate, low electrodermal activity
    streams.ingest_sample(SensorSample("demo", t * 1000, "hr", 68 + rng.normal(0, 1.2)))
    streams.ingest_sample(SensorSample("demo", t * 1000, "eda", 4.0 + rng.normal(0, 0.3)))
    streams.ingest_sample(SensorSample("demo", t * 1000, "temp", 33.1 + rng.normal(0, 0.08)))
    streams.ingest_sample(SensorSample("demo", t * 1000, "rr", 880 + rng.normal(0, 25)))
    try:
        fv = extract_features(streams.stream("demo"), window=50)
    except WarmupError as exc:
        print(f"{t:6d} | warming up ({exc.channel} needs more samples)")
        continue
    print(
        f"{t:6d} | {fv.scr:6.3f} {fv.scl:6.2f} {fv.hr:6.2f} "
        f"{fv.hrv:6.2f} {fv.str_resp:6.3f} {fv.stl:6.2f}"
    )

print()
print("Levels (scl, hr, stl) are moving averages; responses (scr, hrv, str)")
print("are running deviations, with hrv as RMSSD over the rr intervals.")
print("Partial windows are computed as soon as each channel has 2 samples.")
