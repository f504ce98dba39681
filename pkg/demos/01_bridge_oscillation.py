"""Walk through the bridge model: eigenfrequency, amplitude cap, surface.

The deck is a single undamped vertical mode with its surface peak pinned at
1.05 m, so larger oscillation amplitudes lower the equilibrium surface.
The amplitude is capped so the downward deck acceleration never exceeds g --
beyond that, anything resting on the deck would be thrown off.

Run:  python3 demos/01_bridge_oscillation.py
"""

import numpy as np

from bgap import bridge

print("=== eigenfrequency and stiffness ===")
for f in (0.75, 2.0, 7.5):
    k = bridge.stiffness_for_frequency(bridge.DEFAULT_MODAL_MASS, f)
    print(f"f = {f:4.2f} Hz  ->  modal stiffness k = {k:.4g} N/m "
          f"(round trip f = {bridge.frequency_for_stiffness(k, bridge.DEFAULT_MODAL_MASS):.4f})")

print()
print("=== amplitude cap A_max = g / (2 pi f)^2 ===")
for f in (0.75, 2.0, 7.5):
    print(f"f = {f:4.2f} Hz  ->  A_max = {bridge.max_amplitude(f) * 100:7.2f} cm, "
          f"equilibrium surface at {1.05 - bridge.max_amplitude(f):.4f} m")

print()
print("=== free oscillation at 2 Hz, A = 5 cm ===")
params = bridge.BridgeParams(frequency_f=2.0, amplitude_A=0.05)
state = bridge.init_state(params, phase=0.0)
dt = 0.002
t = 0.0
print("   t      z_b       surface   accel")
for i in range(1, 126):
    state = bridge.step_bridge(state, dt)
    t += dt
    if i % 25 == 0:
        h, _ = bridge.surface_height_at(state)
        print(f"{t:5.2f}  {state.displacement_zb:+8.5f}  {h:8.5f}  "
              f"{state.acceleration:+7.3f}")

# energy is conserved to machine precision by the exact propagation
omega = 2.0 * np.pi * params.frequency_f
energy0 = 0.5 * params.stiffness_k * 0.05 ** 2
state = bridge.init_state(params)
for _ in range(5000):  # 10 s
    state = bridge.step_bridge(state, dt)
energy = (0.5 * params.mass_mb * state.velocity ** 2
          + 0.5 * params.stiffness_k * state.displacement_zb ** 2)
print(f"\nenergy drift over 10 s: {abs(energy - energy0) / energy0:.2e} (relative)")

print()
print("=== finite deck used for evaluation ===")
params = bridge.BridgeParams(frequency_f=2.0, amplitude_A=0.05, finite=True)
state = bridge.init_state(params, phase=0.0)
for x in (-1.0, 0.5, 6.6, 13.0, 14.0):
    h, v = bridge.surface_height_at(state, x=x)
    where = "deck" if 0.0 <= x <= params.length else "rigid surroundings"
    print(f"x = {x:5.1f} m: surface {h:.4f} m, vertical velocity {v:+.4f}  ({where})")
