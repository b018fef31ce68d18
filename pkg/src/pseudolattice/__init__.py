"""Spectral monodromy from semiclassical pseudo-lattices."""
