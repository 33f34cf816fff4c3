"""BCPNN with bias regulation, structural plasticity and a Go/No-Go read-out."""
