# stratri
