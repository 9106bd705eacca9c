"""Console output, chunked parallel execution and file I/O helpers"""
