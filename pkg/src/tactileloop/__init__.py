"""Simulator of a closed tactile loop built around a hand-held magnet.

A permanent magnet held above the device is sensed by how much ambient
light it blocks and pushed/pulled by an electromagnet underneath.  The
package models the whole loop as pure discrete-time pieces:

- ``physics``    plant: coil force on the magnet plus the hand holding it
- ``sensing``    light occlusion -> 7-bit codes -> calibrated proximity
- ``actuation``  drive signal -> 200 Hz sample-hold -> 26 levels -> current
- ``behaviour``  proximity-triggered percussive burst + sound synthesis
- ``session``    fixed-step scheduler, traces, CSV export, coupling metric
- ``report``     strip-chart figures rendered from traces
- ``server``     live session streamed over a WebSocket
- ``cli``        ``simulate`` / ``check`` / ``serve`` entry points
"""

__version__ = "0.1.0"
