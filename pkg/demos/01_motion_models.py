"""Linear vs quadratic intermediate flow on a single accelerating point.

A point moves with velocity v and constant acceleration a. The
flows to the neighbouring frames are all we get to see.
"""
import numpy as np

from eqvi import motion

v = np.array([2.0, -1.0])
a = np.array([6.0, 4.0])
disp = lambda t: v * t + a * t * t / 2

# flows from frame 0 to frames -1, 1 and 2, shaped as 1x1 fields
f0m1, f01, f02 = (disp(t).reshape(1, 1, 2) for t in (-1, 1, 2))

t = 0.5
print("true displacement at t=0.5 :", disp(t))
print("linear                      :", motion.linear_predict(f01, t)[0, 0])
print("two-pair quadratic          :", motion.eval_flow_at(motion.qvi_predict(f01, f0m1), t)[0, 0])
print("least squares (three pairs) :", motion.eval_flow_at(motion.ls_predict(f0m1, f01, f02), t)[0, 0])

# the linear error is |a| t (1 - t) / 2
print("expected linear error       :", np.hypot(*a) * t * (1 - t) / 2)

# a jerk breaks the quadratic assumption; the gate falls back to the two-pair estimate
j = np.array([9.0, 8.0])
jdisp = lambda t: disp(t) + j * t**3 / 6
g0m1, g01, g02 = (jdisp(t).reshape(1, 1, 2) for t in (-1, 1, 2))
trip = motion.accel_triplet(g0m1, g01, g02)
print("\nwith jerk, |a1 - a2|        :", np.abs(trip.a1 - trip.a2)[0, 0])
print("alpha                       :", motion.alpha_weight(np.abs(trip.a1 - trip.a2), motion.RQFPParams())[0, 0])
print("rectified a vs two-pair a   :",
      motion.rectified_predict(g0m1, g01, g02).a[0, 0], motion.qvi_predict(g01, g0m1).a[0, 0])
