"""Learning optical flow without flow labels.

MotionNet never sees a ground-truth flow during training. It only learns to
warp each frame back onto its predecessor, so that the reconstruction error,
an SSIM term and a smoothness prior all shrink. Synthetic clips with a known
constant velocity let us measure how well that works.

    python demos/learn_flow.py [steps]
"""
import sys
import time

import numpy as np

from actmap.flowlearn import (FlowTrainConfig, MotionNetConfig, build_motionnet, evaluate_epe, predict_flows,
                              full_resolution_flow, train_motionnet)
from actmap.synthbench import gen_flow_dataset

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 600

train, _ = gen_flow_dataset(200, 3.0, seed=1)
held, held_flow = gen_flow_dataset(50, 3.0, seed=2)
speeds = np.hypot(held_flow[:, 0], held_flow[:, 1]).mean()

net = build_motionnet(MotionNetConfig(), seed=0, dtype=np.float32)
print(f"untrained endpoint error {evaluate_epe(net, held, held_flow):.3f} px (mean speed {speeds:.2f} px/frame)")

t0 = time.perf_counter()
trace = train_motionnet(net, train.astype(np.float32), steps, FlowTrainConfig(lr=1e-3, batch_size=8))
print(f"{steps} steps in {time.perf_counter() - t0:.0f} s, loss {trace[0]:.4f} -> {np.mean(trace[-20:]):.4f}")
print(f"held-out endpoint error {evaluate_epe(net, held, held_flow):.3f} px")

# One clip up close: the predicted field should be nearly uniform and match the true velocity.
fine = full_resolution_flow(predict_flows(net, held[:1].astype(np.float32))[-1].data, (32, 32))[0]
centre = (slice(8, 24), slice(8, 24))
print("true velocity      ", held_flow[0, 0:2, 0, 0].round(2))
print("predicted (median) ", np.array([np.median(fine[0][centre]), np.median(fine[1][centre])]).round(2))
