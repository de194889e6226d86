"""Small point sets used by the filtration demo and the test suite."""
import numpy as np

# Regular hexagon with side 0.98 plus one outlier on the x-axis. Along a
# Rips filtration: seven components merge into two at r = 0.98, the ring
# closes a 1-cycle, the outlier joins at r = 1.176, the cycle fills in at
# r = 0.98*sqrt(3), and the complex keeps densifying afterwards without
# topological change.
SEVEN_POINTS = np.vstack([
    0.98 * np.column_stack([np.cos(np.arange(6) * np.pi / 3), np.sin(np.arange(6) * np.pi / 3)]),
    [[2.156, 0.0]],
])

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
