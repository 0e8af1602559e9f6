"""Tests for the collector nodes.""" 