"""Two-station EV charging pricing game: model, equilibria, design and simulation."""
