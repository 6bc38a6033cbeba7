"""3D action anticipation from streaming skeleton sequences."""
