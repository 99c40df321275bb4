#include "lexiguide/cli.hpp"

int main(int argc, char** argv) { return lexiguide::cli::dispatch(argc, argv); }
