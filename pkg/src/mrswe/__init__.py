"""Wavelet-adaptive shallow water simulation on a Z-order grid hierarchy."""
