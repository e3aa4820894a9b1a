from multigraph_limits.main import app

app(prog_name="multigraph-limits")
