//! Shared inputs for the benches in `benches/`.

/// Queries over the bundled COVID sample, one per task category.
pub const COVID_QUERIES: [&str; 4] = [
    "Among India, Canada, and Germany, what is the country with the highest daily new cases from Nov 1, 2021 to May 1, 2022?",
    "What is the overall trend of daily new cases for all countries?",
    "What are the top 3 countries by daily new cases on Jan 1, 2022?",
    "What is the difference of daily new cases between India and Canada in 2021?",
];
