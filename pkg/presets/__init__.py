"""Named superIFS and palette factories, referenced from run configs as ``{module, function}``."""
