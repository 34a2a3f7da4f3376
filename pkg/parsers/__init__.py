"""
Output formatters: CSV tables and JSONL walk traces
"""
