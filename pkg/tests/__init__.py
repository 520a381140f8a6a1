"""Test configuration and fixtures."""