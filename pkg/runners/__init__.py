"""
Command orchestrators
"""
