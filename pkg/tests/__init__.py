"""Tests package for HWAgent.""" 