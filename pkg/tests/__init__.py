"""Test package for low-order-model."""
