"""Valuation adjustments (ColVA, FVA, CVA, DVA) under the funding invariance framework."""
