"""Riesz transforms, Wolff potentials and quantitative Cantor constructions
for finite atomic measures in R^d."""

from __future__ import annotations
