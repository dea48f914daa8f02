"""Ontology to Wikibase ingestion: parsing, mapping, resumable bot import, quality checks and statistics."""

__version__ = "0.1.0"
