"""Resistive-force-theory simulation of a bipedal walker on granular terrain."""
