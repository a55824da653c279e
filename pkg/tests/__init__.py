"""Tests for YouTube extractor tool."""