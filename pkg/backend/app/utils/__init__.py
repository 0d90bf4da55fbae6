"""
Utils Package

Image file helpers.
"""
