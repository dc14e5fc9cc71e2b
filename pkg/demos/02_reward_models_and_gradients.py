"""The two reward models and their hand-written gradients.

Runs a forward pass through the linear and the convolutional model, then
verifies a few backward-pass entries against central finite differences --
the same check the test suite applies to every parameter.
"""

import numpy as np

from travirl import FeatureStack, FusionNet, ImuWindow, LinearReward, param_init

rng = np.random.default_rng(7)
rows = cols = 12
imu_len = 32

planes = rng.normal(size=(5, rows, cols))
planes[1] = np.abs(planes[1])
planes[2:] = np.clip(planes[2:], 0.0, 1.0)
features = FeatureStack(planes)
imu = ImuWindow(rng.normal(size=(imu_len, 6)))

for model in (LinearReward(rows, cols, imu_len), FusionNet(rows, cols, imu_len)):
    param_init(model, seed=1)
    maps = model.forward(features, imu)
    print(f"{model.kind}: {model.params.size} parameters, "
          f"path map {maps.path.shape}, goal map {maps.goal.shape}, "
          f"r_p range [{maps.path.min():.3f}, {maps.path.max():.3f}]")

# gradient spot check on the convolutional model: probe loss <u, maps>
model = FusionNet(rows, cols, imu_len)
param_init(model, seed=1)
u_path = rng.normal(size=(rows, cols))
u_goal = rng.normal(size=(rows, cols))


def probe():
    maps = model.forward(features, imu)
    model.pop_cache()
    return float((u_path * maps.path).sum() + (u_goal * maps.goal).sum())


model.forward(features, imu)
model.params.zero_grad()
model.backward(u_path, u_goal)

h = 1e-6
print("\nfinite-difference spot checks (analytic vs numeric):")
check_at = rng.choice(model.params.size, size=6, replace=False)
for i in sorted(int(i) for i in check_at):
    orig = model.params.values[i]
    model.params.values[i] = orig + h
    hi = probe()
    model.params.values[i] = orig - h
    lo = probe()
    model.params.values[i] = orig
    fd = (hi - lo) / (2 * h)
    an = model.params.grad[i]
    print(f"  theta[{i:5d}]  analytic {an:+.8f}   numeric {fd:+.8f}")
