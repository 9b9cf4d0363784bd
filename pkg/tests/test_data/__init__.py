# Test data package initialization
